"""Sampled-column (Nystrom) eigendecomposition of the normalized Laplacian,
graph Fourier transform, and band perturbations of prediction signals."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import tensorio

logger = logging.getLogger(__name__)

EIG_FLOOR = 1e-10
SPECTRUM_ENDS = ("low", "high")


class SpectralConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizedLaplacian:
    """``L = I - D^{-1/2} A D^{-1/2}`` over the retained (non-isolated) nodes."""

    matrix: sp.csr_matrix
    kept: np.ndarray  # original ids of retained nodes

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class SpectralBasis:
    eigenvalues: np.ndarray  # (r,) ascending
    eigenvectors: np.ndarray  # (N, r)
    meta: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.eigenvalues)

    def orthogonality_error(self) -> float:
        U = self.eigenvectors
        return float(np.linalg.norm(U.T @ U - np.eye(self.r)))

    def save(self, path: str | Path) -> None:
        tensorio.save(path, {"eigenvalues": self.eigenvalues, "eigenvectors": self.eigenvectors}, self.meta)

    @classmethod
    def load(cls, path: str | Path) -> "SpectralBasis":
        t, meta = tensorio.load(path)
        return cls(t["eigenvalues"], t["eigenvectors"], meta)


def _as_adjacency(adjacency, n: int | None) -> sp.csr_matrix:
    if sp.issparse(adjacency):
        A = sp.csr_matrix(adjacency, dtype=np.float64)
    else:
        arr = np.asarray(adjacency)
        if arr.ndim == 2 and arr.shape[1] == 2 and arr.dtype.kind in "iu" and (n is not None or arr.shape[0] != 2):
            n = int(arr.max()) + 1 if n is None else n
            A = sp.coo_matrix((np.ones(len(arr)), (arr[:, 0], arr[:, 1])), shape=(n, n)).tocsr()
            A = ((A + A.T) > 0).astype(np.float64)
        else:
            A = sp.csr_matrix(arr.astype(np.float64))
    if A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if (abs(A - A.T) > 1e-12).nnz:
        raise ValueError("adjacency must be symmetric (undirected graph)")
    A = A.tolil()
    A.setdiag(0)
    return A.tocsr()


def build_laplacian(adjacency, n: int | None = None, strict: bool = True) -> NormalizedLaplacian:
    """Symmetric normalized Laplacian. Self-loops are ignored; isolated nodes are an
    error in ``strict`` mode and are dropped with a warning otherwise."""
    A = _as_adjacency(adjacency, n)
    deg = np.asarray(A.sum(axis=1)).ravel()
    isolated = np.flatnonzero(deg <= 0)
    kept = np.arange(A.shape[0])
    if len(isolated):
        if strict:
            raise ValueError(f"isolated node(s) {isolated[:10].tolist()} have no Laplacian normalization")
        logger.warning("dropping %d isolated node(s)", len(isolated))
        kept = np.flatnonzero(deg > 0)
        A = A[kept][:, kept]
        deg = deg[kept]
    dinv = sp.diags(1.0 / np.sqrt(deg))
    L = sp.identity(A.shape[0], format="csr") - dinv @ A @ dinv
    L = ((L + L.T) * 0.5).tocsr()
    L.sort_indices()
    return NormalizedLaplacian(L, kept)


def _operator(L, spectrum_end: str) -> sp.csr_matrix:
    M = L.matrix if isinstance(L, NormalizedLaplacian) else sp.csr_matrix(L)
    if spectrum_end == "high":
        return M
    if spectrum_end == "low":
        return (2.0 * sp.identity(M.shape[0], format="csr") - M).tocsr()
    raise SpectralConfigError(f"spectrum_end must be one of {SPECTRUM_ENDS}, got {spectrum_end!r}")


def _fix_signs(U: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(U), axis=0)
    sign = np.sign(U[idx, np.arange(U.shape[1])])
    sign[sign == 0] = 1.0
    return U * sign


def _range_finder(op, omega: np.ndarray, q: int) -> np.ndarray:
    """Orthonormal basis of ``op^q omega``, re-orthonormalized after every product."""
    Y = omega
    for _ in range(q):
        Y, _ = np.linalg.qr(op @ Y)
    return Y


def nystrom_eig(
    L,
    s: int,
    r: int,
    p: int = 10,
    q: int = 3,
    seed: int = 0,
    spectrum_end: str = "low",
    power: str = "A",
    floor: float = EIG_FLOOR,
) -> SpectralBasis:
    """Approximate ``r`` eigenpairs from ``s`` uniformly sampled columns.

    ``spectrum_end="low"`` decomposes ``2I - L`` so the smoothest frequencies are
    recovered, then maps eigenvalues back. ``power`` selects whether the range
    finder powers the sampled block ``A`` or the assembled ``W``.
    """
    M = _operator(L, spectrum_end)
    N = M.shape[0]
    if not (r >= 1 and r + p <= s <= N):
        raise SpectralConfigError(f"need 1 <= r and r + p <= s <= N, got r={r}, p={p}, s={s}, N={N}")
    if q < 1:
        raise SpectralConfigError("q must be >= 1")
    if power not in ("A", "W"):
        raise SpectralConfigError("power must be 'A' or 'W'")
    rng = np.random.default_rng(seed)
    cols = np.sort(rng.choice(N, size=s, replace=False))
    C = M[:, cols].tocsc()
    A = C[cols, :].toarray()
    A = (A + A.T) * 0.5
    a_val, a_vec = np.linalg.eigh(A)
    floored = int(np.sum(a_val < floor))
    a_isqrt = (a_vec / np.sqrt(np.maximum(a_val, floor))) @ a_vec.T
    CtC = (C.T @ C).toarray()
    W = a_isqrt @ CtC @ a_isqrt
    W = (W + W.T) * 0.5
    omega = rng.standard_normal((s, r + p))
    Q = _range_finder(A if power == "A" else W, omega, q)
    lhs = Q.T @ omega
    rhs = Q.T @ W @ omega
    Z = np.linalg.solve(lhs.T, rhs.T).T
    Z = (Z + Z.T) * 0.5
    z_val, z_vec = np.linalg.eigh(Z)
    order = np.argsort(z_val)[::-1][:r]
    sig = z_val[order]
    good = sig > floor
    if not good.all():
        logger.warning("only %d of %d eigenvalues exceed the floor; shrinking r", int(good.sum()), r)
        order, sig = order[good], sig[good]
    U_W = Q @ z_vec[:, order]
    U = np.asarray(C @ (a_isqrt @ U_W)) / np.sqrt(sig)
    vals = 2.0 - sig if spectrum_end == "low" else sig
    asc = np.argsort(vals, kind="stable")
    meta = {
        "s": s, "r": int(len(sig)), "p": p, "q": q, "seed": seed, "spectrum_end": spectrum_end,
        "power": power, "floor": floor, "floored": floored, "n": N,
    }
    return SpectralBasis(vals[asc], _fix_signs(U[:, asc]), meta)


def dense_eig(L, r: int | None = None, spectrum_end: str = "low") -> SpectralBasis:
    """Exact eigenpairs (reference); ``r`` from the requested end of the spectrum."""
    M = L.toarray() if hasattr(L, "toarray") else np.asarray(L)
    vals, vecs = np.linalg.eigh(M)
    r = len(vals) if r is None else r
    idx = np.arange(r) if spectrum_end == "low" else np.arange(len(vals) - r, len(vals))
    return SpectralBasis(vals[idx], _fix_signs(vecs[:, idx]), {"r": r, "spectrum_end": spectrum_end, "exact": True})


# ---------------------------------------------------------------------------
# transforms


def gft(basis: SpectralBasis, f: np.ndarray, direction: str = "forward") -> np.ndarray:
    U = basis.eigenvectors
    f = np.asarray(f, np.float64)
    if direction == "forward":
        return U.T @ f
    if direction == "inverse":
        return U @ f
    raise ValueError("direction must be 'forward' or 'inverse'")


def _band(basis: SpectralBasis, band) -> np.ndarray:
    idx = np.unique(np.asarray(list(band), np.int64))
    if len(idx) and (idx.min() < 0 or idx.max() >= basis.r):
        raise ValueError(f"band indices must lie in [0, {basis.r})")
    return idx


def project(basis: SpectralBasis, y: np.ndarray, band) -> np.ndarray:
    U = basis.eigenvectors[:, _band(basis, band)]
    return U @ (U.T @ np.asarray(y, np.float64))


def intra_perturb(basis: SpectralBasis, y: np.ndarray, band) -> np.ndarray:
    """Remove the band's frequency content from ``y``."""
    y = np.asarray(y, np.float64)
    return y - project(basis, y, band)


def inter_perturb(basis: SpectralBasis, y1: np.ndarray, y2: np.ndarray, band) -> np.ndarray:
    """``y2`` with its band content replaced by that of ``y1``."""
    y2 = np.asarray(y2, np.float64)
    return y2 - project(basis, y2, band) + project(basis, y1, band)


def parse_band(text: str | None, basis: SpectralBasis, freq_above: float | None = None) -> np.ndarray:
    """``"a..b"`` selects indices a <= i < b; ``"i,j,k"`` lists indices; ``freq_above``
    selects every index whose eigenvalue exceeds it. Empty text is an empty band."""
    parts = []
    if text:
        for chunk in text.split(","):
            chunk = chunk.strip()
            m = re.fullmatch(r"(\d+)\.\.(\d+)", chunk)
            if m:
                parts.append(np.arange(int(m.group(1)), int(m.group(2))))
            elif chunk.isdigit():
                parts.append(np.array([int(chunk)]))
            elif chunk:
                raise ValueError(f"cannot parse band {chunk!r}")
    if freq_above is not None:
        parts.append(np.flatnonzero(basis.eigenvalues > freq_above))
    idx = np.unique(np.concatenate(parts)) if parts else np.zeros(0, np.int64)
    return _band(basis, idx)


def energy_profile(basis: SpectralBasis, signals: np.ndarray) -> np.ndarray:
    """Mean over examples (columns) of |GFT| after l2-normalizing each example's spectrum."""
    spec = np.abs(gft(basis, np.asarray(signals, np.float64).reshape(basis.eigenvectors.shape[0], -1)))
    norm = np.linalg.norm(spec, axis=0)
    norm[norm == 0] = 1.0
    return (spec / norm).mean(axis=1)


# ---------------------------------------------------------------------------
# empirical error bound


def spectral_norm(M: np.ndarray, iters: int = 5000, tol: float = 1e-12, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``M^T M``."""
    x = np.random.default_rng(seed).standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = M.T @ (M @ x)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        new = math.sqrt(ny)
        if abs(new - est) <= tol * max(new, 1e-300):
            return new
        est = new
    return est


def zeta(s: int, r: int, p: int) -> float:
    if p <= 1:
        raise SpectralConfigError("oversampling p must exceed 1 for the error bound")
    return 1 + math.sqrt(r / (p - 1)) + (math.e * math.sqrt(r + p) / p) * math.sqrt(s - r)


@dataclass
class BoundReport:
    errors: list[float]
    mean_error: float
    best_rank_error: float
    rhs: float
    passed: bool


def bound_check(
    L, s: int, r: int, p: int, q: int, trials: int = 20, seed: int = 0, spectrum_end: str = "high", power: str = "A"
) -> BoundReport:
    """Mean spectral-norm reconstruction error over ``trials`` seeds versus the
    expected-error bound ``zeta^{1/q} ||X - X_r|| + (1 + zeta^{1/q}) N / sqrt(s) max X_ii``."""
    X = _operator(L, spectrum_end).toarray()
    N = X.shape[0]
    if N > 2000:
        raise SpectralConfigError("bound check needs a dense reference; N is too large")
    z = zeta(s, r, p)
    vals = np.linalg.eigvalsh(X)
    tail = np.sort(np.abs(vals))[::-1]
    best = float(tail[r]) if r < N else 0.0
    errors = []
    for t in range(trials):
        b = nystrom_eig(L, s, r, p, q, seed + t, spectrum_end, power)
        sig = 2.0 - b.eigenvalues if spectrum_end == "low" else b.eigenvalues
        approx = (b.eigenvectors * sig) @ b.eigenvectors.T
        errors.append(spectral_norm(X - approx, seed=seed + t))
    zq = z ** (1.0 / q)
    rhs = zq * best + (1 + zq) * N / math.sqrt(s) * float(np.max(np.diag(X)))
    mean = float(np.mean(errors))
    return BoundReport(errors, mean, best, rhs, mean <= rhs)
