"""Market data tensors and the multilinear kernels built on them.

Hourly OHLCV records for a set of assets are assembled into a dense
(time x asset x feature) array with explicit axis labels.  This module owns
that container plus the raw tensor algebra the decomposition code needs:
mode-n matricization and its inverse, the column-wise Khatri-Rao product,
feature normalization variants, synthetic planted-factor tensors, and the
on-disk formats (OHLCV CSV in, labeled binary tensor directory out).

Matricization uses the classic unfolding convention: for mode n the remaining
axes keep their original relative order and the earlier one varies fastest
(Fortran order).  Under that convention ``unfold(X, 1)`` multiplies directly
against ``khatri_rao(C, B)`` in the alternating least-squares updates, with no
column permutation.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import substream

__all__ = [
    "FEATURES",
    "NORMALIZATIONS",
    "OhlcvRecord",
    "MarketTensor",
    "Matricization",
    "hourly_grid",
    "read_ohlcv_csv",
    "build_tensor",
    "znormalize_feature_slices",
    "per_asset_znormalize",
    "to_returns",
    "matricize",
    "refold",
    "unfold",
    "fold",
    "khatri_rao",
    "synth_tensor",
    "save_tensor",
    "load_tensor",
]

#: Canonical feature order for the third tensor axis.
FEATURES = ("open", "high", "low", "close", "volume")

#: Recognized normalization tags.
NORMALIZATIONS = ("raw", "feature_z", "returns", "per_asset_z")

_UTC = dt.timezone.utc
_HOUR = dt.timedelta(hours=1)


def _as_utc(ts: dt.datetime) -> dt.datetime:
    """Coerce a datetime to UTC; naive datetimes are taken as already UTC."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=_UTC)
    return ts.astimezone(_UTC)


@dataclass(frozen=True)
class OhlcvRecord:
    """One hourly bar for one asset.

    Invariants are enforced at construction: high is the bar maximum, low the
    bar minimum, prices are positive and volume non-negative.
    """

    timestamp: dt.datetime
    asset: str
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        object.__setattr__(self, "timestamp", _as_utc(self.timestamp))
        if not self.asset:
            raise ValueError("asset label must be non-empty")
        prices = (self.open, self.high, self.low, self.close)
        if not all(np.isfinite(prices)) or not np.isfinite(self.volume):
            raise ValueError(f"{self.asset} @ {self.timestamp}: non-finite value")
        if min(prices) <= 0:
            raise ValueError(f"{self.asset} @ {self.timestamp}: prices must be > 0")
        if self.high < max(self.open, self.close) or self.low > min(self.open, self.close):
            raise ValueError(
                f"{self.asset} @ {self.timestamp}: high/low outside open/close range"
            )
        if self.volume < 0:
            raise ValueError(f"{self.asset} @ {self.timestamp}: negative volume")


@dataclass(frozen=True)
class MarketTensor:
    """Dense (time, asset, feature) array with axis labels.

    ``normalization`` records which preprocessing produced the values; it is
    one of ``raw``, ``feature_z``, ``returns`` or ``per_asset_z``.
    """

    values: np.ndarray
    time_labels: tuple
    asset_labels: tuple
    feature_labels: tuple
    normalization: str = "raw"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time_labels", tuple(self.time_labels))
        object.__setattr__(self, "asset_labels", tuple(map(str, self.asset_labels)))
        object.__setattr__(self, "feature_labels", tuple(map(str, self.feature_labels)))
        if values.ndim != 3:
            raise ValueError(f"tensor must be 3-way, got shape {values.shape}")
        expect = (len(self.time_labels), len(self.asset_labels), len(self.feature_labels))
        if values.shape != expect:
            raise ValueError(f"label counts {expect} do not match shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("tensor values must be finite")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(
                f"unknown normalization {self.normalization!r}; expected one of {NORMALIZATIONS}"
            )
        times = self.time_labels
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("time labels must be strictly increasing")
        for name, labels in (("asset", self.asset_labels), ("feature", self.feature_labels)):
            if len(set(labels)) != len(labels):
                raise ValueError(f"duplicate {name} labels")

    @property
    def shape(self):
        return self.values.shape

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_labels.index(name)
        except ValueError:
            raise ValueError(
                f"feature {name!r} not present (have {self.feature_labels})"
            ) from None

    def feature_slice(self, name: str) -> np.ndarray:
        """(time x asset) slice for one feature."""
        return self.values[:, :, self.feature_index(name)]

    def select_assets(self, assets) -> "MarketTensor":
        """Restrict the asset axis to ``assets`` (kept in the given order)."""
        idx = [self.asset_labels.index(a) for a in assets]
        return MarketTensor(
            self.values[:, idx, :],
            self.time_labels,
            tuple(assets),
            self.feature_labels,
            self.normalization,
        )

    def slice_time(self, start: int, stop: int) -> "MarketTensor":
        """Restrict the time axis to the half-open index range [start, stop)."""
        if not 0 <= start < stop <= self.shape[0]:
            raise ValueError(f"bad time slice [{start}, {stop}) for T={self.shape[0]}")
        return MarketTensor(
            self.values[start:stop],
            self.time_labels[start:stop],
            self.asset_labels,
            self.feature_labels,
            self.normalization,
        )


def hourly_grid(start: dt.datetime, end: dt.datetime) -> tuple:
    """Contiguous hourly timestamps from ``start`` to ``end`` inclusive."""
    start, end = _as_utc(start), _as_utc(end)
    if start > end:
        raise ValueError("grid start must not be after end")
    n = int((end - start) / _HOUR) + 1
    if start + (n - 1) * _HOUR != end:
        raise ValueError("grid end must be a whole number of hours after start")
    return tuple(start + i * _HOUR for i in range(n))


# ---------------------------------------------------------------------------
# ingestion


_CSV_HEADER = ["timestamp", "asset", "open", "high", "low", "close", "volume"]


def read_ohlcv_csv(path) -> list:
    """Parse an OHLCV CSV into records.

    The file must carry the exact header
    ``timestamp,asset,open,high,low,close,volume`` with ISO-8601 UTC
    timestamps.  A row that fails to parse or violates bar invariants is
    reported with its file line number.
    """
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if [h.strip() for h in header] != _CSV_HEADER:
            raise ValueError(
                f"{path}: bad header {header!r}; expected {','.join(_CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(_CSV_HEADER):
                raise ValueError(f"{path} line {lineno}: expected 7 fields, got {len(row)}")
            try:
                raw_ts = row[0].strip().replace("Z", "+00:00")
                ts = _as_utc(dt.datetime.fromisoformat(raw_ts))
                rec = OhlcvRecord(
                    timestamp=ts,
                    asset=row[1].strip(),
                    open=float(row[2]),
                    high=float(row[3]),
                    low=float(row[4]),
                    close=float(row[5]),
                    volume=float(row[6]),
                )
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from None
            records.append(rec)
    return records


def build_tensor(records, assets=None, grid=None, max_gap: int = 3,
                 min_coverage: float = 0.9) -> MarketTensor:
    """Assemble hourly records into a raw (time x asset x feature) tensor.

    Parameters
    ----------
    records : iterable of OhlcvRecord
    assets : sequence of str, optional
        Assets to include (default: all present, sorted).
    grid : sequence of datetime, optional
        Hourly grid (default: spans min..max record timestamp).
    max_gap : int
        Longest run of missing hours that may be forward-filled.  A filled
        hour becomes a flat bar at the previous close with zero volume.
    min_coverage : float
        Minimum fraction of grid hours an asset must actually have.

    Raises
    ------
    ValueError
        If any requested asset is below coverage, has a gap longer than
        ``max_gap``, or is missing its first grid hour (nothing to fill
        from).  The message carries a per-asset coverage report.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    if grid is None:
        times = [r.timestamp for r in records]
        grid = hourly_grid(min(times), max(times))
    else:
        grid = tuple(_as_utc(t) for t in grid)
    grid_index = {t: i for i, t in enumerate(grid)}
    if assets is None:
        assets = sorted({r.asset for r in records})
    assets = list(assets)

    by_asset = {a: {} for a in assets}
    for rec in records:
        if rec.asset not in by_asset:
            continue
        slot = grid_index.get(rec.timestamp)
        if slot is None:
            continue  # outside the requested grid
        if slot in by_asset[rec.asset]:
            raise ValueError(f"duplicate record for {rec.asset} @ {rec.timestamp}")
        by_asset[rec.asset][slot] = rec

    T, A, F = len(grid), len(assets), len(FEATURES)
    values = np.empty((T, A, F), dtype=np.float64)
    failures = []
    for j, asset in enumerate(assets):
        rows = by_asset[asset]
        coverage = len(rows) / T
        if coverage < min_coverage:
            failures.append(f"{asset}: coverage {coverage:.1%} < {min_coverage:.0%}")
            continue
        gap_error = None
        run = 0
        last = None
        for i in range(T):
            rec = rows.get(i)
            if rec is not None:
                values[i, j] = (rec.open, rec.high, rec.low, rec.close, rec.volume)
                last, run = rec, 0
                continue
            run += 1
            if last is None:
                gap_error = f"{asset}: missing hour {grid[i].isoformat()} with no prior bar to fill from"
                break
            if run > max_gap:
                gap_error = (
                    f"{asset}: gap ending {grid[i].isoformat()} exceeds max_gap={max_gap}"
                )
                break
            c = last.close
            values[i, j] = (c, c, c, c, 0.0)
        if gap_error:
            failures.append(f"{gap_error} (coverage {coverage:.1%})")
    if failures:
        raise ValueError("asset coverage failures:\n  " + "\n  ".join(failures))
    return MarketTensor(values, grid, tuple(assets), FEATURES, "raw")


# ---------------------------------------------------------------------------
# normalization variants


def znormalize_feature_slices(t: MarketTensor) -> MarketTensor:
    """Z-score each feature slice over all (time, asset) cells.

    Uses the population variance (divide by N).  Idempotent up to floating
    point: reapplying to an already normalized tensor changes nothing beyond
    rounding, so tags ``raw`` and ``feature_z`` are both accepted.
    """
    if t.normalization not in ("raw", "feature_z"):
        raise ValueError(
            f"znormalize expects a raw or feature_z tensor, got {t.normalization!r}"
        )
    out = np.empty_like(t.values)
    dead = []
    for k, name in enumerate(t.feature_labels):
        sl = t.values[:, :, k]
        var = sl.var()
        if var <= 0:
            dead.append(name)
            continue
        out[:, :, k] = (sl - sl.mean()) / np.sqrt(var)
    if dead:
        raise ValueError(f"zero-variance feature slice(s): {', '.join(dead)}")
    return MarketTensor(out, t.time_labels, t.asset_labels, t.feature_labels, "feature_z")


def per_asset_znormalize(t: MarketTensor) -> MarketTensor:
    """Z-score every (asset, feature) series over time (population variance)."""
    if t.normalization not in ("raw", "feature_z"):
        raise ValueError(
            f"per-asset znormalize expects a raw or feature_z tensor, got {t.normalization!r}"
        )
    mu = t.values.mean(axis=0)
    var = t.values.var(axis=0)
    dead = [
        f"{asset}/{feat}"
        for j, asset in enumerate(t.asset_labels)
        for k, feat in enumerate(t.feature_labels)
        if var[j, k] <= 0
    ]
    if dead:
        raise ValueError(f"zero-variance series for: {', '.join(dead)}")
    out = (t.values - mu) / np.sqrt(var)
    return MarketTensor(out, t.time_labels, t.asset_labels, t.feature_labels, "per_asset_z")


def to_returns(t: MarketTensor, kind: str = "log") -> MarketTensor:
    """Hour-over-hour return tensor (length T-1 on the time axis).

    Price features become simple or log returns.  Volume, which may be zero
    on gap-filled hours, becomes the difference of log1p(volume) so it stays
    finite; any other non-price feature is treated the same way.
    """
    if t.normalization != "raw":
        raise ValueError(f"returns require a raw tensor, got {t.normalization!r}")
    if kind not in ("log", "simple"):
        raise ValueError(f"kind must be 'log' or 'simple', got {kind!r}")
    if t.shape[0] < 2:
        raise ValueError("need at least two hours to compute returns")
    out = np.empty((t.shape[0] - 1, t.shape[1], t.shape[2]), dtype=np.float64)
    for k, name in enumerate(t.feature_labels):
        sl = t.values[:, :, k]
        if name == "volume":
            lv = np.log1p(sl)
            out[:, :, k] = lv[1:] - lv[:-1]
        elif kind == "log":
            out[:, :, k] = np.log(sl[1:] / sl[:-1])
        else:
            out[:, :, k] = sl[1:] / sl[:-1] - 1.0
    return MarketTensor(out, t.time_labels[1:], t.asset_labels, t.feature_labels, "returns")


# ---------------------------------------------------------------------------
# matricization and Khatri-Rao


def unfold(values: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n matricization of a 3-way array (modes are numbered 1..3).

    Row i of the result is the mode-n index; columns run over the remaining
    axes in their original order with the earlier axis varying fastest, so
    ``unfold(X, 1) @ khatri_rao(C, B)`` needs no permutation.
    """
    values = np.asarray(values)
    if values.ndim != 3:
        raise ValueError(f"expected a 3-way array, got {values.ndim}-way")
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    axis = mode - 1
    return np.moveaxis(values, axis, 0).reshape(values.shape[axis], -1, order="F")


def fold(matrix: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold` for the given original ``shape``."""
    matrix = np.asarray(matrix)
    shape = tuple(shape)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    axis = mode - 1
    rest = [s for i, s in enumerate(shape) if i != axis]
    arr = matrix.reshape([shape[axis]] + rest, order="F")
    return np.moveaxis(arr, 0, axis)


@dataclass(frozen=True)
class Matricization:
    """An unfolded tensor plus what is needed to refold it exactly."""

    matrix: np.ndarray
    mode: int
    source_shape: tuple


def matricize(t: MarketTensor, mode: int) -> Matricization:
    """Unfold a market tensor along ``mode`` (1=time, 2=asset, 3=feature)."""
    return Matricization(unfold(t.values, mode), mode, tuple(t.shape))


def refold(m: Matricization) -> np.ndarray:
    """Exact inverse of :func:`matricize`; returns the 3-way value array."""
    return fold(m.matrix, m.mode, m.source_shape)


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Khatri-Rao product.

    For (n x R) ``a`` and (m x R) ``b`` the result is (n*m x R) and column r
    is ``kron(a[:, r], b[:, r])`` — the second factor's index varies fastest.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao operands must be matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column counts must match, got {a.shape[1]} and {b.shape[1]}"
        )
    n, r = a.shape
    m = b.shape[0]
    return np.einsum("ir,jr->ijr", a, b).reshape(n * m, r)


# ---------------------------------------------------------------------------
# synthetic tensors


def synth_tensor(shape, rank: int, noise_sd: float = 0.0, seed: int = 42):
    """Random tensor with planted CP structure, plus the planted model.

    Factor columns are unit-norm Gaussian directions; component weights
    decay geometrically from sqrt(T*A*F) so the signal has per-entry scale
    near one and ``noise_sd`` reads as an absolute noise level on that scale.
    Returns ``(MarketTensor, CpModel)``; the model satisfies the same
    normalization conventions as a fitted one.
    """
    from .decompose import CpModel, normalize_factors  # deferred: avoids cycle

    T, A, F = (int(s) for s in shape)
    if min(T, A, F) < 1 or rank < 1:
        raise ValueError("shape entries and rank must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")

    factors = []
    for mode, dim in enumerate((T, A, F), start=1):
        g = substream(seed, "synth", mode)
        m = g.standard_normal((dim, rank))
        factors.append(m / np.linalg.norm(m, axis=0))
    weights = np.sqrt(T * A * F) * 0.7 ** np.arange(rank)
    a, b, c, weights = normalize_factors(factors[0] * weights, factors[1], factors[2])

    clean = np.einsum("tr,ar,fr,r->taf", a, b, c, weights)
    values = clean
    if noise_sd > 0:
        noise = substream(seed, "synth", 4).standard_normal((T, A, F))
        values = clean + noise_sd * noise

    # explained variance of the planted model against the noisy tensor
    den = float(((values - values.mean()) ** 2).sum())
    ev = 1.0 - float(((values - clean) ** 2).sum()) / den if den > 0 else 1.0

    start = dt.datetime(2023, 1, 1, tzinfo=_UTC)
    tensor = MarketTensor(
        values,
        tuple(start + i * _HOUR for i in range(T)),
        tuple(f"A{j:02d}" for j in range(A)),
        FEATURES if F == len(FEATURES) else tuple(f"f{k}" for k in range(F)),
        "raw",
    )
    model = CpModel(
        time_factors=a,
        asset_factors=b,
        feature_factors=c,
        weights=weights,
        rank=rank,
        explained_variance=ev,
        iterations=0,
        converged=True,
        seed=seed,
        fit_history=(),
    )
    return tensor, model


# ---------------------------------------------------------------------------
# serialization


_MAGIC = b"TALN"


def _write_array(path: Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def _read_array(path: Path) -> np.ndarray:
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a tensor-align binary array")
        (ndim,) = struct.unpack("<B", fh.read(1))
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} values, found {data.size}")
    return data.reshape(shape).copy()


def save_tensor(t: MarketTensor, directory) -> Path:
    """Write a tensor as a directory: ``values`` binary + ``labels.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_array(directory / "values", t.values)
    labels = {
        "time": [ts.isoformat() for ts in t.time_labels],
        "assets": list(t.asset_labels),
        "features": list(t.feature_labels),
        "normalization": t.normalization,
    }
    (directory / "labels.json").write_text(json.dumps(labels, indent=2, sort_keys=True))
    return directory


def load_tensor(directory) -> MarketTensor:
    """Read a tensor directory written by :func:`save_tensor`."""
    directory = Path(directory)
    values = _read_array(directory / "values")
    labels = json.loads((directory / "labels.json").read_text())
    times = tuple(dt.datetime.fromisoformat(s) for s in labels["time"])
    return MarketTensor(
        values,
        times,
        tuple(labels["assets"]),
        tuple(labels["features"]),
        labels.get("normalization", "raw"),
    )
