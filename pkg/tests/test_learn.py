import math

import numpy as np
import pytest
import torch

from ctgraph.cluster import fit_clusters, structural_features
from ctgraph.encoder import EncoderConfig
from ctgraph.learn import (
    LinkTask,
    NodeTask,
    TaskModel,
    TaskSpec,
    TrafficTask,
    TrainConfig,
    TrainingDiverged,
    load_checkpoint,
    save_checkpoint,
    task_loss,
    total_objective,
    train,
)
from ctgraph.synthetic import periodic_link_stream, separable_nodes, traffic_fixture

D = torch.float64


@pytest.fixture(scope="module")
def link_task():
    st = periodic_link_stream(n_users=30, n_items=12, days=4, seed=2)
    g = st.graph
    cm = fit_clusters(structural_features(g.n_nodes, g.events.u, g.events.v, g.events.t), 3, seed=0)
    return LinkTask.from_graph(g, cm.assignment, seed=0)


@pytest.fixture(scope="module")
def node_task():
    g, labels = separable_nodes(n=60, n_events=240, seed=0)
    cm = fit_clusters(g.features, 2, seed=0)
    return NodeTask.from_graph(g, labels, cm.assignment, gamma=0.01)


@pytest.fixture(scope="module")
def traffic_task():
    f = traffic_fixture(rows=2, cols=3, days=2, seed=1)
    return TrafficTask(f.timestamps, f.readings, f.road_edges, np.arange(6) % 2, tpp_events=4)


def _link_model(task, gamma=0.1, seed=0):
    return TaskModel(EncoderConfig(in_dim=task.h0.shape[1], n_clusters=3, dim=8, n_heads=2), TaskSpec("link", task.n_items, gamma), seed)


def _node_model(task, gamma=0.01, seed=0):
    return TaskModel(EncoderConfig(in_dim=task.h0.shape[1], n_clusters=2, dim=16, n_heads=2), TaskSpec("node", 2, gamma, 2), seed)


def _traffic_model(task, gamma=0.1, seed=0):
    return TaskModel(EncoderConfig(in_dim=task.window + 2, n_clusters=2, dim=8, n_heads=2), TaskSpec("traffic", 1, gamma), seed)


def test_link_loss_zero_when_certain():
    out = torch.tensor([[[0.0, 1000.0, 0.0], [5.0, 1.0, 0.0]]], dtype=D)
    loss = task_loss("link", out, torch.tensor([[1, 0]]), torch.tensor([[True, False]]))
    assert loss.item() == 0.0


def test_node_loss_uniform_is_log_c():
    loss = task_loss("node", torch.zeros(1, 4, 3, dtype=D), torch.tensor([[0, 1, 2, 1]]), torch.ones(1, 4, dtype=torch.bool))
    assert loss.item() == pytest.approx(math.log(3), abs=1e-15)


def test_traffic_loss_zero_on_match():
    y = torch.randn(2, 5, dtype=D)
    assert task_loss("traffic", y, y, torch.ones(2, 5, dtype=torch.bool)).item() == 0.0


def test_loss_shape_mismatch():
    with pytest.raises(ValueError):
        task_loss("node", torch.zeros(1, 4, 3, dtype=D), torch.zeros(1, 3, dtype=torch.long), torch.ones(1, 4, dtype=torch.bool))


def test_total_objective_arithmetic():
    loss = torch.tensor(1.0, dtype=D)
    assert total_objective(loss, torch.tensor([-2.0], dtype=D), 0.0).item() == 1.0
    assert total_objective(loss, torch.tensor([-2.0], dtype=D), 1.0).item() == 3.0


def test_negative_gamma_rejected():
    with pytest.raises(ValueError):
        TaskSpec("node", 2, -0.5)


def test_total_gradient_is_sum_of_parts(link_task):
    model = _link_model(link_task, gamma=0.3)
    cfg = TrainConfig()
    rows = np.arange(4)
    params = [p for p in model.parameters()]
    obj, loss, R = link_task.objective(model, rows, cfg, 7)
    g_total = torch.autograd.grad(obj, params, retain_graph=True, allow_unused=True)
    g_loss = torch.autograd.grad(loss, params, retain_graph=True, allow_unused=True)
    g_R = torch.autograd.grad(-0.3 * R.mean(), params, allow_unused=True)
    for a, b, c in zip(g_total, g_loss, g_R):
        parts = sum(x for x in (b, c) if x is not None)
        if a is None:
            assert b is None and c is None
        else:
            torch.testing.assert_close(a, parts, atol=1e-12, rtol=1e-10)
    # central difference along a random direction agrees with the summed gradient
    gen = torch.Generator().manual_seed(0)
    dirs = [torch.randn(p.shape, generator=gen, dtype=D) for p in params]
    analytic = sum((d * (g if g is not None else 0)).sum() for d, g in zip(dirs, g_total)).item()
    eps = 1e-6

    def at(sign):
        with torch.no_grad():
            for p, d in zip(params, dirs):
                p.add_(sign * eps * d)
            val = link_task.objective(model, rows, cfg, 7)[0].item()
            for p, d in zip(params, dirs):
                p.sub_(sign * eps * d)
        return val

    fd = (at(1) - at(-1)) / (2 * eps)
    assert abs(fd - analytic) <= 1e-5 * max(1.0, abs(analytic))


def test_zero_epochs_returns_initialization(node_task):
    model = _node_model(node_task)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    res = train(model, node_task, TrainConfig(epochs=0))
    assert res.log == []
    for k, v in res.model.state_dict().items():
        assert torch.equal(v, before[k])


def test_separable_nodes_learned(node_task):
    model = _node_model(node_task)
    train(model, node_task, TrainConfig(lr=1e-2, epochs=50, batch_size=16, patience=50))
    prob, truth = node_task.predict(model, "train")
    assert np.mean(prob.argmax(1) == truth) >= 0.95


def test_lr_schedule(node_task):
    res = train(_node_model(node_task), node_task, TrainConfig(lr=1e-2, epochs=31, patience=100, batch_size=64))
    lrs = [r.lr for r in res.log]
    for e in range(31):
        assert lrs[e] == pytest.approx(1e-2 * 0.9 ** (e // 10), rel=1e-12)
    assert lrs[10] / lrs[9] == pytest.approx(0.9)


def test_training_deterministic(link_task):
    cfg = TrainConfig(lr=1e-2, epochs=2, batch_size=8, seed=4)
    a = train(_link_model(link_task), link_task, cfg)
    b = train(_link_model(link_task), link_task, cfg)
    assert [(r.train_loss, r.val_metric) for r in a.log] == [(r.train_loss, r.val_metric) for r in b.log]
    for (k, v), w in zip(a.model.state_dict().items(), b.model.state_dict().values()):
        assert torch.equal(v, w), k


def test_divergence_raises(node_task):
    model = _node_model(node_task)
    with torch.no_grad():
        model.W_O.fill_(math.nan)
    with pytest.raises(TrainingDiverged):
        train(model, node_task, TrainConfig(epochs=1))


def test_link_distribution_sums_to_one(link_task):
    scores, truth = link_task.predict(_link_model(link_task), "test")
    assert scores.shape == (len(truth), link_task.n_items)
    np.testing.assert_allclose(scores.sum(1), 1.0, atol=1e-9)


def test_link_scores_depend_on_query_time(link_task):
    model = _link_model(link_task)
    with torch.no_grad():
        model.encoder.layers[0].b_G.fill_(0.5)
    it, ts, _, t_last = link_task.eval_seqs["test"][0]
    far = t_last + 5 * 86400.0
    s = link_task.score(model, [(it, ts), (it, ts)], [t_last, far])
    assert not np.allclose(s[0], s[1], atol=1e-9)


def test_traffic_zero_head_gives_bias(traffic_task):
    model = _traffic_model(traffic_task)
    with torch.no_grad():
        model.W_O.zero_()
        model.b_O.fill_(0.25)
    pairs = traffic_task.pairs("test", [3])
    pred = traffic_task.predict(model, pairs)
    np.testing.assert_allclose(pred, 0.25 * traffic_task.std + traffic_task.mean, rtol=1e-14)


def test_traffic_report_rows(traffic_task):
    reps = traffic_task.evaluate(_traffic_model(traffic_task))
    assert [r.scope for r in reps] == ["test@3", "test@6", "test@9"]


def test_node_report_schema(node_task):
    rep = NodeTask.evaluate(node_task, _node_model(node_task), "train")[0]
    assert set(rep.values) == {"Macro-F1", "Micro-F1", "Accuracy"}


def test_checkpoint_roundtrip(tmp_path, traffic_task):
    model = _traffic_model(traffic_task, seed=3)
    save_checkpoint(tmp_path / "c.bin", model, {"masking": "cam"}, {"assignment": np.arange(6) % 2})
    back, extra, arrays = load_checkpoint(tmp_path / "c.bin")
    pairs = traffic_task.pairs("val", [3])
    assert np.array_equal(back.head(back.embed(traffic_task.tokens(pairs))[0]).detach().numpy(),
                          model.head(model.embed(traffic_task.tokens(pairs))[0]).detach().numpy())
    assert extra == {"masking": "cam"} and arrays["assignment"].tolist() == [0, 1, 0, 1, 0, 1]


@pytest.mark.parametrize("masking", ["cam", "special", "none"])
@pytest.mark.parametrize("integrator", ["trapezoid", "mc"])
def test_objectives_finite(link_task, node_task, traffic_task, masking, integrator):
    cfg = TrainConfig(masking=masking, integrator=integrator, mc_samples=2)
    for task, model in ((link_task, _link_model(link_task)), (node_task, _node_model(node_task, 0.1)), (traffic_task, _traffic_model(traffic_task))):
        obj, loss, R = task.objective(model, np.arange(min(4, task.n_train)), cfg, 1)
        assert torch.isfinite(obj) and R is not None and torch.isfinite(R).all()


def test_train_config_validation():
    with pytest.raises(ValueError, match="lr"):
        TrainConfig(lr=0)
    with pytest.raises(ValueError, match="masking"):
        TrainConfig(masking="dropout")
