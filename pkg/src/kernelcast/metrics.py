"""Forecast performance metrics.

Pointwise errors (NMSE, MAE, MdAE, MAPE), the Welch-periodogram power
spectral density error (PSDE), and empirical Wasserstein-1 distances in one
and several dimensions.  Conventions:

* NMSE averages per-dimension SSE / TSS ratios; dimensions with zero
  variance are excluded and flagged.
* MAE is the mean 1-norm of the error vector per step (no division by the
  dimension count); MdAE uses the lower median for even step counts.
* MAPE divides by ``max(eps, |y|)`` per dimension and step.
* PSDE sums ``|PSD - PSD_hat| / PSD`` over dimensions and bins up to a
  cutoff; zero-power bins below the cutoff are skipped and counted.
* W1 for equal-size samples is the exact optimal transport cost; in one
  dimension via the sorted-CDF formula, in d dimensions via a minimum-cost
  perfect matching on the Euclidean cost matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.signal
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import InvalidInputError

W1_DEFAULT_CAP = 512


def _pair(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(y_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a = a[:, None]
        b = b[:, None]
    if a.ndim != 2 or a.shape[0] < 1:
        raise InvalidInputError("expected non-empty (h, d) arrays")
    return a, b


def nmse_detailed(y, y_hat) -> tuple[float, tuple]:
    """Normalized mean squared error plus the flagged zero-variance dims."""
    a, b = _pair(y, y_hat)
    sse = np.sum((a - b) ** 2, axis=0)
    tss = np.sum((a - a.mean(axis=0)) ** 2, axis=0)
    degenerate = tuple(int(j) for j in np.nonzero(tss <= 0.0)[0])
    good = tss > 0.0
    if not np.any(good):
        return float("nan"), degenerate
    return float(np.mean(sse[good] / tss[good])), degenerate


def nmse(y, y_hat) -> float:
    return nmse_detailed(y, y_hat)[0]


def mae(y, y_hat) -> float:
    a, b = _pair(y, y_hat)
    return float(np.mean(np.sum(np.abs(a - b), axis=1)))


def mdae(y, y_hat) -> float:
    """Per-dimension median absolute error, averaged over dimensions.

    Uses the lower median for even counts.
    """
    a, b = _pair(y, y_hat)
    err = np.sort(np.abs(a - b), axis=0)
    h = err.shape[0]
    lower_median = err[(h - 1) // 2]
    return float(np.mean(lower_median))


def mape(y, y_hat, eps: float = 1e-8) -> float:
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    a, b = _pair(y, y_hat)
    denom = np.maximum(eps, np.abs(a))
    return float(np.mean(np.abs(a - b) / denom))


@dataclass
class Periodogram:
    """One-sided Welch estimate per dimension (Hann window)."""

    frequencies: np.ndarray
    power: np.ndarray  # (n_bins, d)
    nperseg: int
    overlap: float
    window: str = "hann"


def welch_psd(values, nperseg: int, overlap: float = 0.5,
              fs: float = 1.0) -> Periodogram:
    """Welch power spectral density, Hann window, mean-detrended segments.

    ``values`` is (n,) or (n, d); densities are returned per dimension on a
    shared one-sided frequency grid.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= nperseg <= n:
        raise InvalidInputError(f"nperseg must lie in [1, {n}]")
    if not 0.0 <= overlap < 1.0:
        raise InvalidInputError("overlap must lie in [0, 1)")
    noverlap = int(round(overlap * nperseg))
    freqs, power = scipy.signal.welch(
        x, fs=fs, window="hann", nperseg=nperseg, noverlap=noverlap,
        detrend="constant", scaling="density", axis=0,
    )
    return Periodogram(freqs, np.atleast_2d(power.T).T, nperseg, overlap)


def psde_detailed(psd_true: Periodogram, psd_est: Periodogram,
                  f_cut_bins: int | None = None) -> tuple[float, int]:
    """Summed relative PSD difference up to a bin cutoff, plus skipped bins."""
    if psd_true.frequencies.shape != psd_est.frequencies.shape or not np.allclose(
        psd_true.frequencies, psd_est.frequencies
    ):
        raise InvalidInputError("periodograms live on different frequency grids")
    if psd_true.power.shape != psd_est.power.shape:
        raise InvalidInputError("periodogram dimensions differ")
    n_bins = psd_true.power.shape[0]
    cut = n_bins if f_cut_bins is None else int(f_cut_bins)
    if not 1 <= cut <= n_bins:
        raise InvalidInputError(f"f_cut_bins must lie in [1, {n_bins}]")
    p = psd_true.power[:cut]
    q = psd_est.power[:cut]
    nonzero = p > 0.0
    skipped = int(np.sum(~nonzero))
    total = float(np.sum(np.abs(p[nonzero] - q[nonzero]) / p[nonzero]))
    return total, skipped


def psde(psd_true: Periodogram, psd_est: Periodogram,
         f_cut_bins: int | None = None) -> float:
    return psde_detailed(psd_true, psd_est, f_cut_bins)[0]


def w1_1d(samples_a, samples_b) -> float:
    """Exact empirical Wasserstein-1 distance on the line.

    Integrates the absolute difference of the two empirical CDFs over the
    merged sample support.
    """
    a = np.sort(np.asarray(samples_a, dtype=np.float64).reshape(-1))
    b = np.sort(np.asarray(samples_b, dtype=np.float64).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("samples must be non-empty")
    support = np.sort(np.concatenate([a, b]))
    deltas = np.diff(support)
    cdf_a = np.searchsorted(a, support[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, support[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def w1_nd(samples_a, samples_b, cap: int = W1_DEFAULT_CAP) -> float:
    """Exact W1 between equal-size d-dimensional samples.

    Equal-weight empirical measures reduce optimal transport to a minimum
    cost perfect matching on the pairwise Euclidean cost matrix.  Sample
    counts above ``cap`` are rejected; subsample first (seeded) if needed.
    """
    A = np.atleast_2d(np.asarray(samples_a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(samples_b, dtype=np.float64))
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise InvalidInputError("samples must be (k, d) arrays of equal d")
    if A.shape[0] != B.shape[0]:
        raise InvalidInputError(
            "sample counts differ; subsample to equal sizes first"
        )
    if A.shape[0] > cap:
        raise InvalidInputError(
            f"{A.shape[0]} samples exceed the cap of {cap}"
        )
    with np.errstate(over="ignore"):
        cost = cdist(A, B)
    if not np.all(np.isfinite(cost)):
        raise InvalidInputError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def subsample_rows(values, k: int, seed: int) -> np.ndarray:
    """Seeded uniform row subsample without replacement (order preserved)."""
    V = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if k >= V.shape[0]:
        return V.copy()
    gen = np.random.Generator(np.random.Philox(seed))
    idx = np.sort(gen.choice(V.shape[0], size=k, replace=False))
    return V[idx]


@dataclass
class MetricReport:
    """One row of evaluation results plus provenance."""

    nmse: float = float("nan")
    mae: float = float("nan")
    mdae: float = float("nan")
    mape: float = float("nan")
    psde: float = float("nan")
    w1: float = float("nan")
    t_valid: float | None = None
    t_valid_censored: bool = False
    flags: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    CSV_FIELDS = ("nmse", "mae", "mdae", "mape", "psde", "w1", "t_valid",
                  "t_valid_censored")

    def csv_header(self) -> str:
        return ",".join(self.CSV_FIELDS)

    def csv_row(self) -> str:
        cells = []
        for name in self.CSV_FIELDS:
            value = getattr(self, name)
            if value is None:
                cells.append("")
            elif isinstance(value, bool):
                cells.append("1" if value else "0")
            else:
                cells.append(f"{value:.17g}")
        return ",".join(cells)

    def to_json(self) -> str:
        doc = {name: getattr(self, name) for name in self.CSV_FIELDS}
        doc["flags"] = self.flags
        doc["config"] = self.config
        return json.dumps(doc, sort_keys=True)
