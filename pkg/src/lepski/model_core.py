"""Sample representation, occupation time, threshold function, geometric grid
and the rectangular-kernel estimators built on them.

All estimators use the closed Euclidean ball |X - x| <= h and inverse-variance
weights 1/sigma_{k-1}^2.  Everything here is a pure function of immutable
inputs and safe to call from any number of workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EmptyWindow, GridEmpty, NoTruth


def _as_rows(x, dim: Optional[int] = None) -> np.ndarray:
    """Coerce covariates to a float (n, d) array; scalars and 1-d input map to d=1."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ValueError(f"covariates must be at most 2-d, got shape {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got {a.shape[1]}")
    return a


def _as_point(x, dim: Optional[int] = None) -> np.ndarray:
    a = np.asarray(x, dtype=float).reshape(-1)
    if dim is not None and a.size != dim:
        raise ValueError(f"estimation point has dimension {a.size}, sample has {dim}")
    return a


@dataclass
class SamplePath:
    """Observed triples (X_{k-1}, Y_k, sigma_{k-1}) up to a stopping time.

    Parameters
    ----------
    x_obs : array (n_stop, d)
        Covariates X_0, ..., X_{N-1}.
    y_obs : array (n_stop,)
        Responses Y_1, ..., Y_N.
    sigma : array (n_stop,)
        Observed noise-scale upper bounds sigma_0, ..., sigma_{N-1}; all > 0.
    truth : callable, optional
        Hidden regression function, vectorized over (n, d) rows.  Present only
        for simulated data; enables the bias proxy and risk evaluation.
    """

    x_obs: np.ndarray
    y_obs: np.ndarray
    sigma: np.ndarray
    truth: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.x_obs = _as_rows(self.x_obs)
        self.y_obs = np.asarray(self.y_obs, dtype=float).reshape(-1)
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(-1)
        n = self.x_obs.shape[0]
        if n < 1:
            raise ValueError("a sample must contain at least one observation")
        if not (self.y_obs.size == n and self.sigma.size == n):
            raise ValueError("x_obs, y_obs and sigma must have identical length")
        if not np.all(np.isfinite(self.y_obs)):
            raise ValueError("responses must be finite")
        if not (np.all(np.isfinite(self.sigma)) and np.all(self.sigma > 0)):
            raise ValueError("sigma entries must be strictly positive and finite")

    @property
    def n_stop(self) -> int:
        return self.x_obs.shape[0]

    @property
    def dim(self) -> int:
        return self.x_obs.shape[1]

    def truth_values(self) -> np.ndarray:
        """f(X_0), ..., f(X_{N-1}); raises when no truth is attached."""
        if self.truth is None:
            raise NoTruth("sample carries no regression truth")
        return np.asarray(self.truth(self.x_obs), dtype=float).reshape(-1)

    def distances(self, x_point) -> np.ndarray:
        """Euclidean distances |X_{k-1} - x| for k = 1..N."""
        x = _as_point(x_point, self.dim)
        d = self.x_obs - x[None, :]
        if self.dim == 1:
            return np.abs(d[:, 0])
        return np.sqrt(np.einsum("ij,ij->i", d, d))


@dataclass
class GridConfig:
    """Estimation point plus grid, selection-rule and modulus-floor parameters."""

    x_point: np.ndarray
    h0: float
    q: float = 0.9
    b: float = 1.0
    nu: float = 2.0
    u0: float = 1.0
    delta0: float = 0.1
    alpha0: float = 2.0
    j_max: int = 60

    def __post_init__(self):
        self.x_point = _as_point(self.x_point)
        if not (self.h0 > 0 and 0 < self.q < 1):
            raise ValueError("need h0 > 0 and 0 < q < 1")
        if min(self.b, self.nu, self.u0, self.delta0, self.alpha0) <= 0:
            raise ValueError("b, nu, u0, delta0, alpha0 must all be positive")
        if self.j_max < 1:
            raise ValueError("j_max must be at least 1")

    @property
    def dim(self) -> int:
        return self.x_point.size


@dataclass
class OccupationProfile:
    """The realized grid {h_j : L(h_j) > 0} with cached occupation and threshold values.

    Bandwidths are stored in descending order (h_0 first); l_values is
    nonincreasing along the array and every entry is positive; psi_values
    is increasing along the array with psi_values[0] == 1.
    """

    bandwidths: np.ndarray
    l_values: np.ndarray
    psi_values: np.ndarray

    def __len__(self) -> int:
        return self.bandwidths.size

    @property
    def levels(self) -> np.ndarray:
        """The normalized levels (psi(h)/L(h))^(1/2), increasing along the grid."""
        return np.sqrt(self.psi_values / self.l_values)


@dataclass
class GridStats:
    """OccupationProfile plus per-bandwidth kernel statistics (one sorted pass).

    f_tilde and m_values are populated only when the sample carries a truth
    handle; m_values holds the martingale parts M(h_j).
    """

    profile: OccupationProfile
    f_hat: np.ndarray
    f_tilde: Optional[np.ndarray] = None
    m_values: Optional[np.ndarray] = None


# ------------------------------------------------------------------
# elementary operations
# ------------------------------------------------------------------

def occupation_time(sample: SamplePath, x_point, h: float) -> float:
    """Occupation time L(h) = sum_k sigma_{k-1}^(-2) 1{|X_{k-1} - x| <= h}.

    Returns 0.0 (not an error) when no covariate falls in the closed ball.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    mask = sample.distances(x_point) <= h
    return float(np.sum(sample.sigma[mask] ** -2.0))


def psi(h: float, cfg: GridConfig) -> float:
    """Threshold slope function psi(h) = 1 + b log(h0 / h); psi(h0) = 1."""
    if not 0 < h <= cfg.h0:
        raise ValueError(f"psi is defined on (0, h0]; got h={h} with h0={cfg.h0}")
    return 1.0 + cfg.b * np.log(cfg.h0 / h)


def z_statistic(m: float, l: float, a: float) -> float:
    """Regularized self-normalized statistic Z = sqrt(a) |m| / (a + l)."""
    if a <= 0:
        raise ValueError("regularization parameter a must be positive")
    if l < 0:
        raise ValueError("occupation time must be nonnegative")
    return float(np.sqrt(a) * abs(m) / (a + l))


# ------------------------------------------------------------------
# grid construction
# ------------------------------------------------------------------

def grid_statistics(sample: SamplePath, cfg: GridConfig) -> GridStats:
    """Occupation profile and kernel statistics for every realized grid bandwidth.

    Works on the distance order: weights, weighted responses (and weighted
    truth values when available) are accumulated as prefix sums over sorted
    distances, so all grid values come out of one O(n log n) pass.

    Raises
    ------
    GridEmpty
        when L(h0) = 0, i.e. no observation within h0 of the estimation point.
    """
    dist = sample.distances(cfg.x_point)
    order = np.argsort(dist, kind="stable")
    ds = dist[order]
    inv_var = sample.sigma[order] ** -2.0
    cum_w = np.cumsum(inv_var)
    cum_wy = np.cumsum(inv_var * sample.y_obs[order])

    bandwidths = cfg.h0 * cfg.q ** np.arange(cfg.j_max + 1, dtype=float)
    counts = np.searchsorted(ds, bandwidths, side="right")
    if counts[0] == 0:
        raise GridEmpty("no observation within h0 of the estimation point")
    # L is monotone in h, so the realized grid is the prefix with counts > 0
    keep = np.flatnonzero(counts > 0)
    last = keep[-1] + 1
    bandwidths, counts = bandwidths[:last], counts[:last]

    l_values = cum_w[counts - 1]
    psi_values = 1.0 + cfg.b * np.log(cfg.h0 / bandwidths)
    f_hat = cum_wy[counts - 1] / l_values

    f_tilde = m_values = None
    if sample.truth is not None:
        cum_wf = np.cumsum(inv_var * sample.truth_values()[order])
        f_tilde = cum_wf[counts - 1] / l_values
        m_values = (cum_wy - cum_wf)[counts - 1]

    profile = OccupationProfile(bandwidths, l_values, psi_values)
    return GridStats(profile, f_hat, f_tilde, m_values)


def build_grid(sample: SamplePath, cfg: GridConfig) -> OccupationProfile:
    """The realized geometric grid: all h_j = h0 q^j with L(h_j) > 0, j <= j_max."""
    return grid_statistics(sample, cfg).profile


# ------------------------------------------------------------------
# kernel estimators
# ------------------------------------------------------------------

def kernel_estimate(sample: SamplePath, x_point, h: float) -> float:
    """Rectangular-kernel estimator of f(x).

    f_hat(h) = L(h)^(-1) sum_k sigma_{k-1}^(-2) 1{|X_{k-1} - x| <= h} Y_k

    Raises
    ------
    EmptyWindow
        when L(h) = 0.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    mask = sample.distances(x_point) <= h
    if not mask.any():
        raise EmptyWindow(f"no observation within h={h} of the estimation point")
    w = sample.sigma[mask] ** -2.0
    return float(np.sum(w * sample.y_obs[mask]) / np.sum(w))


def tilde_estimate(sample: SamplePath, x_point, h: float) -> float:
    """Bias proxy: the kernel weights of `kernel_estimate` applied to f(X_{k-1}).

    Test-only oracle; requires the sample to carry its regression truth.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    f_vals = sample.truth_values()
    mask = sample.distances(x_point) <= h
    if not mask.any():
        raise EmptyWindow(f"no observation within h={h} of the estimation point")
    w = sample.sigma[mask] ** -2.0
    return float(np.sum(w * f_vals[mask]) / np.sum(w))


def martingale_part(sample: SamplePath, x_point, h: float) -> float:
    """Noise part M(h) = sum_k sigma_{k-1}^(-2) 1{|X_{k-1} - x| <= h} eps_k.

    eps_k = Y_k - f(X_{k-1}); satisfies kernel - tilde = M(h)/L(h) when L(h) > 0.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    eps = sample.y_obs - sample.truth_values()
    mask = sample.distances(x_point) <= h
    return float(np.sum((sample.sigma[mask] ** -2.0) * eps[mask]))


# ------------------------------------------------------------------
# CSV serialization:  header  k,x_0..x_{d-1},y,sigma  one row per k = 1..N
# ------------------------------------------------------------------

def write_sample_csv(sample: SamplePath, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k"] + [f"x_{i}" for i in range(sample.dim)] + ["y", "sigma"])
        for k in range(sample.n_stop):
            row = [str(k + 1)]
            row += [repr(float(v)) for v in sample.x_obs[k]]
            row += [repr(float(sample.y_obs[k])), repr(float(sample.sigma[k]))]
            writer.writerow(row)


def read_sample_csv(path) -> SamplePath:
    """Load a sample written by `write_sample_csv`; dimension inferred from the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        x_cols = [c for c in header if c.startswith("x_")]
        d = len(x_cols)
        if header != ["k"] + [f"x_{i}" for i in range(d)] + ["y", "sigma"]:
            raise ValueError(f"unexpected sample header: {header}")
        rows = list(reader)
    n = len(rows)
    x = np.empty((n, d))
    y = np.empty(n)
    sig = np.empty(n)
    for i, row in enumerate(rows):
        x[i] = [float(v) for v in row[1 : 1 + d]]
        y[i] = float(row[1 + d])
        sig[i] = float(row[2 + d])
    return SamplePath(x, y, sig)
