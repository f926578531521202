"""Matrix alignment: orthogonal Procrustes rotation and congruence scoring.

Two entity-by-dimension matrices are compared by first finding the orthogonal
matrix Q minimizing ||A Q - B||_F (closed form: Q = U Vᵀ for the SVD
AᵀB = U Σ Vᵀ), then scoring each dimension with Tucker's congruence
coefficient

    phi(x, y) = Σ x_i y_i / sqrt(Σ x_i² · Σ y_i²)

— a cosine without centering — and averaging |phi| over all dimensions.
When the matrices have different widths the narrower one is either padded
with zero columns (padded dimensions score exactly 0, diluting the mean) or
the wider one is projected onto its leading singular directions.

Also provided are four alternative whole-matrix association scores (RV
coefficient, distance correlation, first canonical correlation, and a
normalized PLS first-component score) used to cross-check the congruence
results.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RotationMatrix",
    "AlignmentResult",
    "procrustes",
    "pad_columns",
    "svd_reduce",
    "equalize_widths",
    "tucker_phi",
    "matrix_congruence",
    "alt_alignment",
    "ALT_METRICS",
]


def _matrix(m, name: str = "matrix") -> np.ndarray:
    out = np.asarray(m, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {out.ndim}-D")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


@dataclass(frozen=True)
class RotationMatrix:
    """Orthogonal alignment map; ``non_unique`` flags a rank-deficient fit."""

    q: np.ndarray
    non_unique: bool = False

    def __post_init__(self):
        q = _matrix(self.q, "rotation")
        object.__setattr__(self, "q", q)
        p = q.shape[0]
        if q.shape != (p, p):
            raise ValueError(f"rotation must be square, got {q.shape}")
        if not np.allclose(q.T @ q, np.eye(p), atol=1e-9):
            raise ValueError("rotation is not orthogonal within 1e-9")


def procrustes(a, b) -> RotationMatrix:
    """Orthogonal matrix Q minimizing ||A Q - B||_F.

    Solved in closed form from the SVD of AᵀB; reflections are allowed
    (det Q may be -1).  If AᵀB is rank deficient the minimizer is not
    unique and the result is flagged.
    """
    a = _matrix(a, "a")
    b = _matrix(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise ValueError("need at least two rows")
    m = a.T @ b
    u, s, vt = np.linalg.svd(m)
    q = u @ vt
    top = s[0] if s.size else 0.0
    non_unique = bool(top <= 0 or s[-1] <= 1e-12 * top)
    return RotationMatrix(q, non_unique)


def pad_columns(m, target_cols: int) -> np.ndarray:
    """Append zero columns on the right until ``target_cols`` columns."""
    m = _matrix(m)
    if target_cols < m.shape[1]:
        raise ValueError(f"target {target_cols} < current width {m.shape[1]}")
    if target_cols == m.shape[1]:
        return m.copy()
    return np.hstack([m, np.zeros((m.shape[0], target_cols - m.shape[1]))])


def svd_reduce(m, d: int) -> np.ndarray:
    """Best rank-d column-space projection: leading singular directions
    scaled by their singular values.  Column signs are fixed (largest-
    magnitude entry positive) so the reduction is deterministic."""
    m = _matrix(m)
    if not 1 <= d <= min(m.shape):
        raise ValueError(f"d must be in [1, {min(m.shape)}], got {d}")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    u = u[:, :d].copy()
    for r in range(d):
        col = u[:, r]
        if col.any() and col[np.argmax(np.abs(col))] < 0:
            u[:, r] = -col
    return u * s[:d]


def equalize_widths(a, b, mode: str = "pad") -> tuple:
    """Bring two matrices to a common width.

    ``pad`` zero-pads the narrower matrix; ``reduce`` projects the wider one
    onto as many leading singular directions as the narrower has columns.
    """
    a = _matrix(a, "a")
    b = _matrix(b, "b")
    if mode not in ("pad", "reduce"):
        raise ValueError(f"mode must be 'pad' or 'reduce', got {mode!r}")
    pa, pb = a.shape[1], b.shape[1]
    if pa == pb:
        return a, b
    if mode == "pad":
        width = max(pa, pb)
        return pad_columns(a, width), pad_columns(b, width)
    width = min(pa, pb)
    a = a if pa == width else svd_reduce(a, width)
    b = b if pb == width else svd_reduce(b, width)
    return a, b


def tucker_phi(x, y) -> float:
    """Congruence coefficient of two vectors (cosine without centering).

    Bounded in [-1, 1]; invariant to positive rescaling of either argument
    and sign-flipped by negative rescaling; exactly 1 iff one vector is a
    positive multiple of the other.  By the zero-padding convention the
    coefficient is defined as 0 when either vector is all zeros.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size == 0:
        raise ValueError("empty vectors")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    num = float(x @ y)
    dx = float(x @ x)
    dy = float(y @ y)
    if dx == 0.0 or dy == 0.0:
        return 0.0
    # squared form keeps phi(x, x) exactly 1 and caps rounding at the bound
    val = np.sqrt(min(1.0, (num * num) / (dx * dy)))
    return float(np.copysign(val, num)) if num != 0 else 0.0


@dataclass(frozen=True)
class AlignmentResult:
    """Per-dimension congruence after (optional) Procrustes alignment."""

    rotation: RotationMatrix
    per_dim_phi: tuple
    mean_abs_phi: float
    padded_dims: int
    method: str
    n_entities: int


def matrix_congruence(a, b, rotate: bool = True, method: str = "zero_pad") -> AlignmentResult:
    """Rotate ``a`` onto ``b`` and score per-dimension congruence.

    Both matrices must already have equal shape (see
    :func:`equalize_widths`).  The mean runs over *all* dimensions, so
    zero-padded dimensions (phi = 0 by convention) dilute it; ``padded_dims``
    counts the dimensions where that convention fired.
    """
    a = _matrix(a, "a")
    b = _matrix(b, "b")
    if a.shape != b.shape:
        raise ValueError(
            f"shape mismatch: {a.shape} vs {b.shape}; equalize widths first"
        )
    n, p = a.shape
    if rotate:
        rot = procrustes(a, b)
    else:
        rot = RotationMatrix(np.eye(p))
    ar = a @ rot.q
    per_dim = []
    padded = 0
    for j in range(p):
        xj, yj = ar[:, j], b[:, j]
        if float(xj @ xj) == 0.0 or float(yj @ yj) == 0.0:
            padded += 1
            per_dim.append(0.0)
        else:
            per_dim.append(tucker_phi(xj, yj))
    return AlignmentResult(
        rotation=rot,
        per_dim_phi=tuple(per_dim),
        mean_abs_phi=float(np.mean(np.abs(per_dim))),
        padded_dims=padded,
        method=method,
        n_entities=n,
    )


# ---------------------------------------------------------------------------
# alternative whole-matrix association scores


def _center(m: np.ndarray) -> np.ndarray:
    return m - m.mean(axis=0, keepdims=True)


def _rv(a: np.ndarray, b: np.ndarray) -> float:
    """RV coefficient of the column-centered matrices."""
    ga = _center(a) @ _center(a).T
    gb = _center(b) @ _center(b).T
    num = float((ga * gb).sum())
    da = float((ga * ga).sum())
    db = float((gb * gb).sum())
    if da == 0.0 or db == 0.0:
        raise ValueError("RV undefined for a constant matrix")
    # squared form keeps RV(X, X) exactly 1
    return float(np.sqrt(min(1.0, (num * num) / (da * db))))


def _distance_matrix(m: np.ndarray) -> np.ndarray:
    # direct differences: the Gram-expansion shortcut loses ~1e-9 to
    # cancellation, which matters when cross-checking against references
    diff = m[:, None, :] - m[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def _dcor(a: np.ndarray, b: np.ndarray) -> float:
    """Distance correlation (biased V-statistic form)."""
    da = _distance_matrix(a)
    db = _distance_matrix(b)

    def double_center(d):
        return d - d.mean(axis=0) - d.mean(axis=1)[:, None] + d.mean()

    ca, cb = double_center(da), double_center(db)
    dcov2_xy = float((ca * cb).mean())
    dcov2_xx = float((ca * ca).mean())
    dcov2_yy = float((cb * cb).mean())
    if dcov2_xx == 0.0 or dcov2_yy == 0.0:
        raise ValueError("distance correlation undefined for a constant matrix")
    if dcov2_xy <= 0.0:
        return 0.0
    # fourth-root form keeps dCor(X, X) exactly 1
    return float((dcov2_xy * dcov2_xy / (dcov2_xx * dcov2_yy)) ** 0.25)


def _inv_sqrt(s: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(s)
    w = np.maximum(w, 1e-300)
    return (v / np.sqrt(w)) @ v.T


def _cca(a: np.ndarray, b: np.ndarray) -> float:
    """First canonical correlation.

    A trace-scaled ridge (1e-6 · tr(S)/dim) is added to both covariance
    blocks whenever n < 3 · max(p, q); a warning reports the regularization.
    """
    n = a.shape[0]
    p, q = a.shape[1], b.shape[1]
    ac, bc = _center(a), _center(b)
    saa = ac.T @ ac / (n - 1)
    sbb = bc.T @ bc / (n - 1)
    sab = ac.T @ bc / (n - 1)
    if n < 3 * max(p, q):
        warnings.warn(
            f"CCA ridge regularization applied (n={n} < 3*max(p,q)={3 * max(p, q)})",
            stacklevel=3,
        )
        saa = saa + 1e-6 * (np.trace(saa) / p) * np.eye(p)
        sbb = sbb + 1e-6 * (np.trace(sbb) / q) * np.eye(q)
    k = _inv_sqrt(saa) @ sab @ _inv_sqrt(sbb)
    rho = float(np.linalg.svd(k, compute_uv=False)[0])
    return min(1.0, max(0.0, rho))


def _pls(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized PLS first-component score.

    First singular value of the cross-covariance of the column-standardized
    matrices, divided by the product of their own largest singular values
    (equivalently sqrt of the product of the leading covariance-block
    singular values), then clamped to [0, 1].  PLS(X, X) = 1.
    """
    def standardize(m):
        c = _center(m)
        sd = c.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise ValueError("PLS undefined with constant columns")
        return c / sd

    az, bz = standardize(a), standardize(b)
    num = float(np.linalg.svd(az.T @ bz, compute_uv=False)[0])
    da = float(np.linalg.svd(az, compute_uv=False)[0])
    db = float(np.linalg.svd(bz, compute_uv=False)[0])
    return float(np.sqrt(min(1.0, (num * num) / (da * da * db * db))))


ALT_METRICS = {"rv": _rv, "dcor": _dcor, "cca": _cca, "pls": _pls}


def alt_alignment(a, b, metric: str) -> float:
    """Alternative association score between two row-aligned matrices.

    ``metric`` is one of ``rv``, ``dcor``, ``cca`` or ``pls``.  Row counts
    must match; widths may differ (these scores do not need padding).
    """
    a = _matrix(a, "a")
    b = _matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 3:
        raise ValueError("need at least 3 rows")
    try:
        fn = ALT_METRICS[metric]
    except KeyError:
        raise ValueError(
            f"unknown metric {metric!r}; expected one of {sorted(ALT_METRICS)}"
        ) from None
    return fn(a, b)
