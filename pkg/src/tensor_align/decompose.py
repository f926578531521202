"""Tensor factorization: CP via alternating least squares, Tucker via HOOI.

The CP fit alternates exact least-squares updates of the three factor
matrices,

    A <- X(1) (C ⊙ B) (CᵀC * BᵀB)†
    B <- X(2) (C ⊙ A) (CᵀC * AᵀA)†
    C <- X(3) (B ⊙ A) (BᵀB * AᵀA)†

where ⊙ is the column-wise Khatri-Rao product, * the Hadamard product and
† the Moore-Penrose pseudoinverse, until the relative change in
reconstruction error drops below tolerance.  Each update solves its
subproblem exactly, so the error history is non-increasing sweep over sweep.

Fitted models are normalized to a canonical form: unit-norm factor columns
with the absorbed scale in ``weights`` sorted descending, and the largest-
magnitude entry of every asset-factor (and feature-factor) column made
positive, compensating in the time factors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import substream
from .tensor_core import MarketTensor, _read_array, _write_array, khatri_rao, unfold

__all__ = [
    "CpModel",
    "TuckerModel",
    "RankSelection",
    "cp_als",
    "explained_variance",
    "select_rank",
    "tucker",
    "mode_product",
    "factor_congruence",
    "normalize_factors",
    "save_cp_model",
    "load_cp_model",
]

#: Relative singular-value cutoff for the Gram pseudoinverse.
_PINV_CUTOFF = 1e-12
#: Ridge added to the Gram product if the pseudoinverse output is unusable.
_RIDGE = 1e-10


def _values(t) -> np.ndarray:
    if isinstance(t, MarketTensor):
        return t.values
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got {arr.ndim}-way")
    return arr


def normalize_factors(a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Canonicalize CP factors.

    Columns are scaled to unit norm with the scale absorbed into per-component
    weights, components are sorted by descending weight, and signs are fixed
    so the largest-magnitude entry of each asset (b) and feature (c) column is
    positive, with compensating flips applied to the time (a) columns.
    Zero-norm columns keep weight 0 and are left as zeros.
    """
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    c = np.array(c, dtype=np.float64)
    weights = np.ones(a.shape[1])
    for m in (a, b, c):
        norms = np.linalg.norm(m, axis=0)
        weights *= norms
        nz = norms > 0
        m[:, nz] /= norms[nz]
    order = np.argsort(-weights, kind="stable")
    a, b, c, weights = a[:, order], b[:, order], c[:, order], weights[order]
    for m in (b, c):
        for r in range(m.shape[1]):
            col = m[:, r]
            if col.any() and col[np.argmax(np.abs(col))] < 0:
                m[:, r] = -col
                a[:, r] = -a[:, r]
    return a, b, c, weights


@dataclass(frozen=True)
class CpModel:
    """Rank-R CP decomposition of a (time x asset x feature) tensor."""

    time_factors: np.ndarray
    asset_factors: np.ndarray
    feature_factors: np.ndarray
    weights: np.ndarray
    rank: int
    explained_variance: float
    iterations: int
    converged: bool
    seed: int
    fit_history: tuple = ()
    gram_rank_deficient: bool = False

    def reconstruct(self) -> np.ndarray:
        """Dense reconstruction sum_r w_r a_r ∘ b_r ∘ c_r."""
        return np.einsum(
            "tr,ar,fr,r->taf",
            self.time_factors,
            self.asset_factors,
            self.feature_factors,
            self.weights,
        )


def _pinv_gram(g: np.ndarray) -> tuple:
    """Pseudoinverse of a small symmetric Gram product.

    SVD-based with a relative cutoff; falls back to a ridge solve if the
    result is unusable.  Returns (inverse, rank_deficient_flag).
    """
    u, s, vt = np.linalg.svd(g, hermitian=True)
    cutoff = _PINV_CUTOFF * (s[0] if s.size else 0.0)
    deficient = bool(np.any(s <= cutoff))
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    pinv = (vt.T * inv_s) @ u.T
    if not np.all(np.isfinite(pinv)):
        pinv = np.linalg.inv(g + _RIDGE * np.eye(g.shape[0]))
        deficient = True
    return pinv, deficient


def explained_variance(t, reconstruction) -> float:
    """Share of mean-centered variation captured by a reconstruction.

    EV = 1 - ||X - Xhat||_F^2 / ||X - xbar||_F^2 with xbar the global scalar
    mean of X.  Raises if X is (numerically) constant.
    """
    x = _values(t)
    xhat = _values(reconstruction)
    if x.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    den = float(((x - x.mean()) ** 2).sum())
    if den <= 0:
        raise ValueError("tensor is constant; explained variance undefined")
    return 1.0 - float(((x - xhat) ** 2).sum()) / den


def cp_als(t, rank: int, seed: int = 42, max_iter: int = 500, tol: float = 1e-8) -> CpModel:
    """Fit a rank-R CP model by alternating least squares.

    Initial factor entries are i.i.d. uniform [0, 1) drawn from counter-based
    streams keyed (seed, mode), so the fit is bit-reproducible regardless of
    execution order.  Convergence is declared when the relative change in
    reconstruction error between sweeps falls below ``tol``.
    """
    x = _values(t)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    dims = x.shape
    if min(dims) < 1:
        raise ValueError("tensor has an empty mode")
    x1, x2, x3 = unfold(x, 1), unfold(x, 2), unfold(x, 3)
    x_norm = float(np.linalg.norm(x1))

    a, b, c = (
        substream(seed, "cp-init", mode).random((dim, rank))
        for mode, dim in enumerate(dims, start=1)
    )

    history = []
    deficient = False
    prev_err = None
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        gb, gc = b.T @ b, c.T @ c
        pinv, flag = _pinv_gram(gc * gb)
        a = x1 @ khatri_rao(c, b) @ pinv
        deficient |= flag

        ga = a.T @ a
        pinv, flag = _pinv_gram(gc * ga)
        b = x2 @ khatri_rao(c, a) @ pinv
        deficient |= flag

        gb = b.T @ b
        pinv, flag = _pinv_gram(gb * ga)
        c = x3 @ khatri_rao(b, a) @ pinv
        deficient |= flag

        xhat1 = a @ khatri_rao(c, b).T
        err = float(np.linalg.norm(x1 - xhat1))
        history.append(err)
        # exact fits leave err jittering at machine epsilon, where the
        # relative-change test below never fires
        if err <= tol * x_norm:
            converged = True
            break
        if prev_err is not None:
            denom = prev_err if prev_err > 0 else 1.0
            if abs(prev_err - err) / denom < tol:
                converged = True
                break
        prev_err = err

    a, b, c, weights = normalize_factors(a, b, c)
    recon = np.einsum("tr,ar,fr,r->taf", a, b, c, weights)
    return CpModel(
        time_factors=a,
        asset_factors=b,
        feature_factors=c,
        weights=weights,
        rank=rank,
        explained_variance=explained_variance(x, recon),
        iterations=sweeps,
        converged=converged,
        seed=seed,
        fit_history=tuple(history),
        gram_rank_deficient=deficient,
    )


@dataclass(frozen=True)
class RankSelection:
    """Outcome of scanning CP ranks against an explained-variance target."""

    rank: int
    ev_curve: tuple
    target_reached: bool


def select_rank(t, target_ev: float = 0.90, max_rank: int = 8, seed: int = 42,
                **als_kwargs) -> RankSelection:
    """Smallest rank whose CP fit reaches ``target_ev``.

    Fits every rank 1..max_rank with a fixed seed so the full EV curve is
    available for reporting, then picks the smallest rank at or above the
    target.  If no rank reaches the target the selection falls back to
    ``max_rank`` with ``target_reached=False``.
    """
    if not 0 < target_ev <= 1:
        raise ValueError(f"target_ev must be in (0, 1], got {target_ev}")
    if max_rank < 1:
        raise ValueError(f"max_rank must be >= 1, got {max_rank}")
    curve = tuple(
        cp_als(t, r, seed=seed, **als_kwargs).explained_variance
        for r in range(1, max_rank + 1)
    )
    for r, ev in enumerate(curve, start=1):
        if ev >= target_ev:
            return RankSelection(r, curve, True)
    return RankSelection(max_rank, curve, False)


# ---------------------------------------------------------------------------
# Tucker


def mode_product(values: np.ndarray, matrix: np.ndarray, mode: int) -> np.ndarray:
    """Multiply a 3-way array by a matrix along one mode (modes 1..3)."""
    values = np.asarray(values)
    matrix = np.asarray(matrix)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    return np.moveaxis(np.tensordot(matrix, values, axes=(1, mode - 1)), 0, mode - 1)


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive."""
    u = u.copy()
    for r in range(u.shape[1]):
        col = u[:, r]
        if col.any() and col[np.argmax(np.abs(col))] < 0:
            u[:, r] = -col
    return u


def _leading_singular_vectors(m: np.ndarray, k: int) -> np.ndarray:
    u, _, _ = np.linalg.svd(m, full_matrices=False)
    return _fix_signs(u[:, :k])


@dataclass(frozen=True)
class TuckerModel:
    """Tucker decomposition with column-orthonormal factor matrices."""

    core: np.ndarray
    time_factors: np.ndarray
    asset_factors: np.ndarray
    feature_factors: np.ndarray
    ranks: tuple
    explained_variance: float
    iterations: int
    converged: bool

    def reconstruct(self) -> np.ndarray:
        out = mode_product(self.core, self.time_factors, 1)
        out = mode_product(out, self.asset_factors, 2)
        return mode_product(out, self.feature_factors, 3)


def tucker(t, ranks, max_iter: int = 100, tol: float = 1e-8) -> TuckerModel:
    """Tucker decomposition via higher-order orthogonal iteration.

    Initialized from the truncated SVD of each unfolding (HOSVD) and refined
    by HOOI sweeps; entirely SVD-based, hence deterministic with no seed.
    """
    x = _values(t)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != 3:
        raise ValueError(f"need one rank per mode, got {ranks}")
    for r, d in zip(ranks, x.shape):
        if not 1 <= r <= d:
            raise ValueError(f"ranks {ranks} incompatible with shape {x.shape}")

    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    factors = [_leading_singular_vectors(unfold(x, n), ranks[n - 1]) for n in (1, 2, 3)]
    prev_err = None
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        for n in (1, 2, 3):
            y = x
            for m in (1, 2, 3):
                if m != n:
                    y = mode_product(y, factors[m - 1].T, m)
            factors[n - 1] = _leading_singular_vectors(unfold(y, n), ranks[n - 1])
        core = x
        for m in (1, 2, 3):
            core = mode_product(core, factors[m - 1].T, m)
        # for orthonormal factors ||X - Xhat||^2 = ||X||^2 - ||core||^2
        err2 = float((x * x).sum() - (core * core).sum())
        err = np.sqrt(max(err2, 0.0))
        if prev_err is not None:
            denom = prev_err if prev_err > 0 else 1.0
            if abs(prev_err - err) / denom < tol:
                converged = True
                break
        prev_err = err

    recon = core
    for m in (1, 2, 3):
        recon = mode_product(recon, factors[m - 1], m)
    return TuckerModel(
        core=core,
        time_factors=factors[0],
        asset_factors=factors[1],
        feature_factors=factors[2],
        ranks=ranks,
        explained_variance=explained_variance(x, recon),
        iterations=sweeps,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# factor comparison


def factor_congruence(b1: np.ndarray, b2: np.ndarray) -> float:
    """Mean absolute congruence between two factor matrices.

    Columns are greedily matched by largest |phi| (each column used at most
    once); the result is the mean |phi| over the min(R1, R2) matched pairs.
    """
    from .align import tucker_phi  # deferred: align builds on this module's outputs

    b1, b2 = np.asarray(b1, dtype=float), np.asarray(b2, dtype=float)
    if b1.ndim != 2 or b2.ndim != 2 or b1.shape[0] != b2.shape[0]:
        raise ValueError("factor matrices must share their row dimension")
    r1, r2 = b1.shape[1], b2.shape[1]
    if r1 == 0 or r2 == 0:
        raise ValueError("factor matrices must have at least one column")
    phi = np.abs(
        [[tucker_phi(b1[:, i], b2[:, j]) for j in range(r2)] for i in range(r1)]
    )
    matched = []
    mask = np.ones_like(phi, dtype=bool)
    for _ in range(min(r1, r2)):
        masked = np.where(mask, phi, -1.0)
        i, j = np.unravel_index(np.argmax(masked), phi.shape)
        matched.append(phi[i, j])
        mask[i, :] = False
        mask[:, j] = False
    return float(np.mean(matched))


# ---------------------------------------------------------------------------
# model serialization


def save_cp_model(model: CpModel, directory) -> Path:
    """Write a CP model as a directory: JSON manifest + binary factors."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": "cp",
        "rank": model.rank,
        "weights": [float(w) for w in model.weights],
        "explained_variance": model.explained_variance,
        "iterations": model.iterations,
        "converged": model.converged,
        "seed": model.seed,
        "gram_rank_deficient": model.gram_rank_deficient,
        "fit_history": [float(e) for e in model.fit_history],
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    _write_array(directory / "time_factors", model.time_factors)
    _write_array(directory / "asset_factors", model.asset_factors)
    _write_array(directory / "feature_factors", model.feature_factors)
    return directory


def load_cp_model(directory) -> CpModel:
    """Read a CP model directory written by :func:`save_cp_model`."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("kind") != "cp":
        raise ValueError(f"{directory}: not a CP model directory")
    return CpModel(
        time_factors=_read_array(directory / "time_factors"),
        asset_factors=_read_array(directory / "asset_factors"),
        feature_factors=_read_array(directory / "feature_factors"),
        weights=np.asarray(manifest["weights"], dtype=float),
        rank=int(manifest["rank"]),
        explained_variance=float(manifest["explained_variance"]),
        iterations=int(manifest["iterations"]),
        converged=bool(manifest["converged"]),
        seed=int(manifest["seed"]),
        fit_history=tuple(manifest.get("fit_history", ())),
        gram_rank_deficient=bool(manifest.get("gram_rank_deficient", False)),
    )
