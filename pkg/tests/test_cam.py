import json

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ctgraph.cam import masked_forward, plan_masks, sample_plan, special_token_inputs, temporal_encoding
from ctgraph.encoder import Encoder, EncoderConfig, TokenBatch, masked_softmax
from ctgraph.synthetic import separable_nodes

D = torch.float64


def _graph_batch(seed=0, n=30):
    g, labels = separable_nodes(n=n, n_events=120, seed=seed)
    return g, labels


def test_te_at_zero():
    te = temporal_encoding(np.array(0.0), 8)
    assert np.all(te[0::2] == 0) and np.all(te[1::2] == 1)


def test_te_values():
    # frozen from 30-digit evaluations of sin(1e4), cos(1e4) and sin(1e4 / 10000^(2/4))
    te = temporal_encoding(np.array(10000.0), 4)
    assert te[0] == pytest.approx(-0.305614388888252141, abs=1e-12)
    assert te[1] == pytest.approx(-0.952155368259014851, abs=1e-12)
    assert te[2] == pytest.approx(-0.506365641109758794, abs=1e-12)


def test_te_torch_matches_numpy(rng):
    t = rng.uniform(0, 1e4, size=(3, 4))
    np.testing.assert_allclose(temporal_encoding(torch.from_numpy(t), 6).numpy(), temporal_encoding(t, 6), atol=1e-15)


def test_te_range(rng):
    te = temporal_encoding(rng.uniform(-1e6, 1e6, size=10_000), 16)
    assert np.all(np.abs(te) <= 1.0)


def test_te_odd_width():
    with pytest.raises(ValueError):
        temporal_encoding(np.zeros(2), 3)


def test_zero_ratio_is_empty_and_identity():
    g, _ = _graph_batch()
    plan, batch = plan_masks(g, 0.0, None, seed=1)
    assert plan.empty
    enc = Encoder(EncoderConfig(in_dim=4, n_clusters=1, dim=8, n_heads=2), seed=0)
    a, _ = enc(batch)
    b, _ = masked_forward(plan, enc, batch)
    assert torch.equal(a, b)


def test_same_seed_same_plan():
    g, labels = _graph_batch()
    p1, b = plan_masks(g, 0.3, labels, seed=5)
    p2, _ = plan_masks(g, 0.3, labels, seed=5)
    assert np.array_equal(p1.masked_queries, p2.masked_queries) and np.array_equal(p1.masked_keys, p2.masked_keys)
    assert p1.to_json(b.nbr.numpy()) == p2.to_json(b.nbr.numpy())


def test_ratio_concentration():
    B, T = 1, 10_000
    batch = TokenBatch(torch.zeros(B, T, 1, dtype=D), torch.full((B, T, 1), T), torch.zeros(B, T, 1, dtype=torch.bool),
                       torch.zeros(B, T, 1, dtype=torch.long), torch.zeros(B, T, 1, dtype=D), torch.zeros(B, T, dtype=D),
                       torch.zeros(B, T, dtype=D))
    plan = sample_plan(batch, 0.5, seed=3)
    assert abs(plan.masked_queries.mean() - 0.5) <= 0.02


def test_invalid_ratio():
    g, _ = _graph_batch()
    with pytest.raises(ValueError):
        plan_masks(g, 1.0, None, seed=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.9))
def test_plan_invariants(seed, ratio):
    g, labels = _graph_batch()
    plan, batch = plan_masks(g, ratio, labels, seed=seed)
    nbr, mask = batch.nbr.numpy(), batch.nbr_mask.numpy()
    # masked keys are real keys, never the query itself, and never starve a query
    assert not np.any(plan.masked_keys & ~mask)
    assert not np.any(plan.masked_keys & (nbr == np.arange(nbr.shape[1])[None, :, None]))
    assert np.all((mask & ~plan.masked_keys).any(-1) | ~mask.any(-1))


def test_tied_keys_keep_both_kinds(rng):
    B, T = 4, 6
    nbr = np.tile(np.arange(T), (B, T, 1))
    batch = TokenBatch(torch.zeros(B, T, 1, dtype=D), torch.from_numpy(nbr), torch.ones(B, T, T, dtype=torch.bool),
                       torch.zeros(B, T, T, dtype=torch.long), torch.zeros(B, T, T, dtype=D), torch.zeros(B, T, dtype=D),
                       torch.zeros(B, T, dtype=D))
    for seed in range(20):
        plan = sample_plan(batch, 0.2, seed, tie_keys=True)
        assert np.all(plan.masked_queries.any(1)) and np.all((~plan.masked_queries).any(1))
        assert np.array_equal(plan.masked_keys, plan.masked_queries[:, None, :].repeat(T, 1))


def test_plan_json_lists_node_ids():
    g, labels = _graph_batch()
    plan, batch = plan_masks(g, 0.4, labels, seed=2)
    doc = json.loads(plan.to_json(batch.nbr.numpy()))
    assert doc["seed"] == 2 and doc["groups"][0]["masked_queries"] == np.flatnonzero(plan.masked_queries[0]).tolist()


def test_removed_key_weights_renormalize():
    scores = torch.tensor([[0.3], [1.2], [-0.4]], dtype=D)
    full, _ = masked_softmax(scores, torch.ones(3, dtype=torch.bool))
    part, _ = masked_softmax(scores, torch.tensor([True, False, True]))
    assert part[1, 0] == 0 and part.sum().item() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(part[[0, 2], 0].numpy(), full[[0, 2], 0].numpy() / (1 - full[1, 0].item()), rtol=1e-14)


def test_override_with_original_query_is_identity():
    g, labels = _graph_batch()
    _, batch = plan_masks(g, 0.0, None, seed=0)
    enc = Encoder(EncoderConfig(in_dim=4, n_clusters=1, dim=8, n_heads=2, temporal_encoding=False), seed=0)
    base, _ = enc(batch)
    q = torch.einsum("bti,hdi->bthd", batch.x, enc.layers[0].W_Q).reshape(1, -1, 8)
    same, _ = enc(batch, q, torch.ones(batch.time.shape, dtype=torch.bool))
    torch.testing.assert_close(same, base, atol=1e-14, rtol=0)


def test_all_ones_labels_share_query():
    g, _ = _graph_batch()
    plan, batch = plan_masks(g, 0.5, np.ones((g.n_nodes, 1)), seed=0)
    enc = Encoder(EncoderConfig(in_dim=4, n_clusters=1, dim=8, n_heads=2), seed=0)
    W = torch.randn(8, 1, dtype=D, generator=torch.Generator().manual_seed(0))
    q = (torch.as_tensor(plan.labels) @ W.T)[0]
    rows = np.flatnonzero(plan.masked_queries[0])
    assert len(rows) > 1 and torch.all(q[rows] == q[rows[0]])


def test_masked_keys_do_not_influence(rng):
    g, labels = _graph_batch()
    plan, batch = plan_masks(g, 0.5, None, seed=9)
    enc = Encoder(EncoderConfig(in_dim=4, n_clusters=1, dim=8, n_heads=2), seed=0)
    a, _ = masked_forward(plan, enc, batch)
    # perturbing the inputs of tokens only ever used as masked keys leaves the target rows unchanged
    nbr, mask, mk = batch.nbr.numpy()[0], batch.nbr_mask.numpy()[0], plan.masked_keys[0]
    u = int(np.flatnonzero(mk.any(-1))[0])
    victims = set(nbr[u][mk[u]].tolist()) - set(nbr[u][mask[u] & ~mk[u]].tolist()) - {u}
    x = batch.x.clone()
    x[0, sorted(victims)] += 100.0
    b, _ = masked_forward(plan, enc, batch, x=x)
    torch.testing.assert_close(a[0, u], b[0, u], atol=1e-12, rtol=0)


def test_special_token_replaces_rows():
    x = torch.zeros(1, 3, 2, dtype=D)
    tok = torch.tensor([1.0, 2.0], dtype=D)
    out = special_token_inputs(x, np.array([[False, True, False]]), tok)
    assert torch.equal(out[0, 1], tok) and torch.equal(out[0, 0], x[0, 0])
