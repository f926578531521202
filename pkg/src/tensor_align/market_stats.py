"""Per-asset market statistics and the cross-sectional statistics matrix.

Seven descriptors are computed per asset from hourly close and volume
series: mean return, return volatility, annualized Sharpe ratio, maximum
drawdown, average volume, volatility-of-volatility (std of rolling-window
volatility), and the linear price trend.  Returns are simple returns on
close by default (``r_t = P_t / P_{t-1} - 1``); a log-return variant sits
behind ``return_kind="log"``.  Sharpe is annualized with sqrt(252 * 24)
hourly periods.

``build_stats_matrix`` stacks the descriptors into an (asset x 7) matrix and
z-scores each column across assets (population variance, matching the
tensor normalization convention).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .tensor_core import MarketTensor

__all__ = [
    "STAT_NAMES",
    "ANNUALIZATION",
    "StatVector",
    "StatsMatrix",
    "compute_asset_stats",
    "build_stats_matrix",
    "residualize",
]

STAT_NAMES = (
    "mean_return",
    "volatility",
    "sharpe",
    "max_drawdown",
    "avg_volume",
    "vol_of_vol",
    "trend",
)

#: Hourly observations per trading year: 252 days x 24 hours.
ANNUALIZATION = float(np.sqrt(252 * 24))

DEFAULT_VOL_WINDOW = 168  # one week of hours


@dataclass(frozen=True)
class StatVector:
    """The seven market descriptors for one asset."""

    asset: str
    mean_return: float
    volatility: float
    sharpe: float
    max_drawdown: float
    avg_volume: float
    vol_of_vol: float
    trend: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STAT_NAMES], dtype=float)


def compute_asset_stats(close, volume, asset: str = "", vol_window: int = DEFAULT_VOL_WINDOW,
                        return_kind: str = "simple") -> StatVector:
    """Market descriptors for one asset's hourly close/volume series.

    Requires positive prices, non-negative volume and at least
    ``vol_window + 2`` observations so the rolling volatility has a spread.
    A constant price series (zero return volatility) is rejected.
    """
    label = asset or "<asset>"
    close = np.asarray(close, dtype=np.float64)
    volume = np.asarray(volume, dtype=np.float64)
    if close.ndim != 1 or close.shape != volume.shape:
        raise ValueError(f"{label}: close and volume must be 1-D and equal length")
    if close.size < vol_window + 2:
        raise ValueError(
            f"{label}: need at least vol_window + 2 = {vol_window + 2} hours, got {close.size}"
        )
    if np.any(close <= 0):
        raise ValueError(f"{label}: prices must be positive")
    if np.any(volume < 0):
        raise ValueError(f"{label}: volume must be non-negative")
    if return_kind not in ("simple", "log"):
        raise ValueError(f"return_kind must be 'simple' or 'log', got {return_kind!r}")

    if return_kind == "simple":
        returns = close[1:] / close[:-1] - 1.0
    else:
        returns = np.log(close[1:] / close[:-1])

    vol = float(returns.std(ddof=1))
    if vol == 0.0:
        raise ValueError(f"{label}: constant price series, volatility undefined")
    mean_ret = float(returns.mean())
    sharpe = mean_ret / vol * ANNUALIZATION

    running_max = np.maximum.accumulate(close)
    mdd = float(((close - running_max) / running_max).min())

    windows = np.lib.stride_tricks.sliding_window_view(returns, vol_window)
    rolling_vol = windows.std(axis=1, ddof=1)
    vol_of_vol = float(rolling_vol.std(ddof=1))

    t = np.arange(close.size, dtype=np.float64)
    tc = t - t.mean()
    trend = float((tc @ (close - close.mean())) / (tc @ tc))

    return StatVector(
        asset=label,
        mean_return=mean_ret,
        volatility=vol,
        sharpe=sharpe,
        max_drawdown=mdd,
        avg_volume=float(volume.mean()),
        vol_of_vol=vol_of_vol,
        trend=trend,
    )


@dataclass(frozen=True)
class StatsMatrix:
    """(asset x statistic) matrix, optionally column z-scored."""

    values: np.ndarray
    asset_labels: tuple
    stat_labels: tuple = STAT_NAMES
    normalized: bool = True

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "asset_labels", tuple(map(str, self.asset_labels)))
        object.__setattr__(self, "stat_labels", tuple(map(str, self.stat_labels)))
        if values.shape != (len(self.asset_labels), len(self.stat_labels)):
            raise ValueError(
                f"shape {values.shape} does not match "
                f"{len(self.asset_labels)} assets x {len(self.stat_labels)} stats"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("statistics matrix contains non-finite values")
        if len(set(self.asset_labels)) != len(self.asset_labels):
            raise ValueError("duplicate asset labels")

    def select_assets(self, assets) -> "StatsMatrix":
        idx = [self.asset_labels.index(a) for a in assets]
        return StatsMatrix(self.values[idx], tuple(assets), self.stat_labels, self.normalized)


def build_stats_matrix(t: MarketTensor, vol_window: int = DEFAULT_VOL_WINDOW,
                       return_kind: str = "simple", normalize: bool = True) -> StatsMatrix:
    """Statistics matrix for every asset in a raw tensor.

    Needs ``close`` and ``volume`` features and the raw normalization tag
    (statistics are meaningless on z-scored values).  With ``normalize=True``
    each column is z-scored across assets using the population variance; a
    zero-variance column (e.g. all assets identical) is an error naming the
    offending columns.
    """
    if t.normalization != "raw":
        raise ValueError(f"stats need a raw tensor, got {t.normalization!r}")
    close = t.feature_slice("close")
    volume = t.feature_slice("volume")
    rows = []
    errors = []
    for j, asset in enumerate(t.asset_labels):
        try:
            rows.append(
                compute_asset_stats(
                    close[:, j], volume[:, j], asset=asset,
                    vol_window=vol_window, return_kind=return_kind,
                ).as_array()
            )
        except ValueError as exc:
            errors.append(str(exc))
    if errors:
        raise ValueError("per-asset statistic failures:\n  " + "\n  ".join(errors))
    values = np.vstack(rows)
    if normalize:
        mu = values.mean(axis=0)
        var = values.var(axis=0)  # population convention, matching tensor z-scores
        dead = [name for name, v in zip(STAT_NAMES, var) if v <= 0]
        if dead:
            raise ValueError(f"zero-variance statistic column(s): {', '.join(dead)}")
        values = (values - mu) / np.sqrt(var)
    return StatsMatrix(values, t.asset_labels, STAT_NAMES, normalized=normalize)


def residualize(m, covariate) -> np.ndarray:
    """Replace each column with its OLS residual on [1, covariate].

    The result is orthogonal to the covariate and mean-zero per column.  A
    constant covariate carries no information: the matrix is only demeaned
    and a warning is emitted.
    """
    m = np.asarray(m, dtype=np.float64)
    cov = np.asarray(covariate, dtype=np.float64).ravel()
    if m.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if cov.size != m.shape[0]:
        raise ValueError(f"covariate length {cov.size} != row count {m.shape[0]}")
    if m.shape[0] < 3:
        raise ValueError("need at least 3 rows to residualize")
    if np.ptp(cov) == 0:
        warnings.warn("constant covariate: residualize reduces to demeaning", stacklevel=2)
        return m - m.mean(axis=0)
    x = np.column_stack([np.ones_like(cov), cov])
    beta, *_ = np.linalg.lstsq(x, m, rcond=None)
    return m - x @ beta
