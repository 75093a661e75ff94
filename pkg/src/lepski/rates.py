"""Modulus envelopes, oracle bandwidths and the deterministic rate.

Two bandwidth notions live here.  The grid oracle H* balances the stochastic
level (psi/L)^(1/2) against the clamped modulus W-bar over the realized grid.
The continuum bandwidths H_w (empirical) and h_w (deterministic, replacing L
by its expectation) are minima over h in (0, h0]; both are located exactly,
up to a relative bisection tolerance of 1e-10, by exploiting that
L(h) w(h)^2 - psi(h) is increasing in h.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import TooFewSamples
from .model_core import GridConfig, OccupationProfile, SamplePath, psi

REL_TOL = 1e-10


# ------------------------------------------------------------------
# modulus specification
# ------------------------------------------------------------------

@dataclass
class ModulusSpec:
    """Smoothness envelope W for the bias proxy.

    kind = "holder":   w(h) = scale * h^s * ell_w(h) with s in (0, 1]; ell_w
    defaults to the constant function 1.  kind = "explicit": `w_func` is any
    harness-supplied callable h -> W(h) (e.g. the literal sup of the bias
    proxy increments); no shape is assumed.

    delta0/alpha0/u0 are the floor and cap used by `modulus_bar`; they mirror
    the grid configuration.  For Holder specs the constructor checks, on a
    log grid of 1000 points in (0, h0], that w is nondecreasing, w(h) >=
    delta0 (h/h0)^alpha0 and w(h) <= u0; violations raise ValueError.
    """

    kind: str
    s: Optional[float] = None
    scale: Optional[float] = None
    ell_w: Optional[Callable[[np.ndarray], np.ndarray]] = None
    w_func: Optional[Callable[[float], float]] = None
    delta0: float = 0.1
    alpha0: float = 2.0
    u0: float = 1.0
    h0: float = 1.0

    def __post_init__(self):
        if self.kind == "holder":
            if self.s is None or self.scale is None:
                raise ValueError("holder modulus needs s and scale")
            if not (0 < self.s <= 1) or self.scale <= 0:
                raise ValueError("need 0 < s <= 1 and scale > 0")
            hs = np.exp(np.linspace(np.log(self.h0) - 12.0, np.log(self.h0), 1000))
            w = self.w(hs)
            if np.any(np.diff(w) < 0):
                raise ValueError("modulus must be increasing on (0, h0]")
            if np.any(w < self.delta0 * (hs / self.h0) ** self.alpha0 - 1e-12):
                raise ValueError("modulus falls below the floor delta0 (h/h0)^alpha0")
            if np.any(w > self.u0 * (1 + 1e-12)):
                raise ValueError("modulus exceeds the cap u0 on (0, h0]")
        elif self.kind == "explicit":
            if self.w_func is None:
                raise ValueError("explicit modulus needs w_func")
        else:
            raise ValueError(f"unknown modulus kind {self.kind!r}")

    def w(self, h):
        """Raw modulus value(s) W(h), before flooring and capping."""
        h = np.asarray(h, dtype=float)
        if self.kind == "holder":
            out = self.scale * h**self.s
            if self.ell_w is not None:
                out = out * self.ell_w(h)
        else:
            out = np.vectorize(self.w_func, otypes=[float])(h)
        return out if out.ndim else float(out)


def holder_modulus(s: float, scale: float = 1.0, h0: float = 1.0, *,
                   delta0: float = 0.1, alpha0: float = 2.0, u0: float = 1.0,
                   ell_w=None) -> ModulusSpec:
    return ModulusSpec(kind="holder", s=s, scale=scale, ell_w=ell_w,
                       delta0=delta0, alpha0=alpha0, u0=u0, h0=h0)


def explicit_modulus(w_func, h0: float = 1.0, *, delta0: float = 0.1,
                     alpha0: float = 2.0, u0: float = 1.0) -> ModulusSpec:
    return ModulusSpec(kind="explicit", w_func=w_func,
                       delta0=delta0, alpha0=alpha0, u0=u0, h0=h0)


def modulus_bar(w_spec: ModulusSpec, h, h0: float):
    """Clamped modulus: [W(h) or the floor delta0 (h/h0)^alpha0, whichever is
    larger] capped at u0."""
    h = np.asarray(h, dtype=float)
    floor = w_spec.delta0 * (h / h0) ** w_spec.alpha0
    out = np.minimum(np.maximum(w_spec.w(h), floor), w_spec.u0)
    return out if out.ndim else float(out)


# ------------------------------------------------------------------
# grid oracle bandwidth and events
# ------------------------------------------------------------------

def oracle_bandwidth(profile: OccupationProfile, w_spec: ModulusSpec,
                     cfg: GridConfig) -> Optional[float]:
    """H* = min{h in grid : (psi(h)/L(h))^(1/2) <= W-bar(h)}.

    None when h0 already fails, i.e. off the event {L(h0)^(-1/2) <= W-bar(h0)}.
    """
    wbar = modulus_bar(w_spec, profile.bandwidths, cfg.h0)
    feasible = profile.levels <= wbar
    if not feasible[0]:
        return None
    return float(profile.bandwidths[np.max(np.flatnonzero(feasible))])


def omega_prime_event(profile: OccupationProfile, w_spec: ModulusSpec,
                      cfg: GridConfig) -> bool:
    """{L(h0)^(-1/2) <= W-bar(h0)} and {W(H*) <= u0}; the second condition is
    evaluated only when H* exists."""
    h_star = oracle_bandwidth(profile, w_spec, cfg)
    if h_star is None:
        return False
    return bool(w_spec.w(h_star) <= w_spec.u0)


# ------------------------------------------------------------------
# continuum bandwidths
# ------------------------------------------------------------------

def _bisect_first_feasible(g, lo: float, hi: float) -> float:
    """Smallest root of the increasing function g on [lo, hi] with g(lo) < 0 <= g(hi)."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= REL_TOL * hi:
            break
    return hi


def empirical_hw(sample: SamplePath, cfg: GridConfig,
                 w_spec: ModulusSpec) -> Optional[float]:
    """H_w = min{h in (0, h0] : (psi(h)/L(h))^(1/2) <= w(h)}, or None off Omega_0.

    Requires a constant sigma across the sample.  L is a right-continuous
    nondecreasing step function of h, so F(h) = L(h) w(h)^2 - psi(h) is
    increasing; the first feasible h is either a jump point (a realized
    distance) or the root of F on the flat piece where the crossing occurs,
    found by bisection to relative 1e-10.
    """
    sig = sample.sigma
    if not np.allclose(sig, sig[0], rtol=1e-12, atol=0.0):
        raise ValueError("the empirical continuum bandwidth assumes a constant sigma")
    inv_var = float(sig[0]) ** -2.0

    dist = sample.distances(cfg.x_point)
    ds = np.unique(dist[dist <= cfg.h0])
    if ds.size == 0:
        return None  # L(h0) = 0
    counts = np.searchsorted(np.sort(dist), ds, side="right")
    levels = counts * inv_var

    def F(h, lev):
        return lev * float(w_spec.w(h)) ** 2 - psi(h, cfg)

    if F(cfg.h0, levels[-1]) < 0:
        return None  # Omega_0 fails: L(h0) < w(h0)^(-2)

    for i in range(ds.size):
        left = float(ds[i])
        right = float(ds[i + 1]) if i + 1 < ds.size else cfg.h0
        lev = float(levels[i])
        if left > 0 and F(left, lev) >= 0:
            return left  # first feasible point is the jump itself
        if F(right, lev) >= 0:
            # crossing lies inside this flat piece; bracket it from below
            lo = left
            if lo <= 0:  # piece starts at a zero distance; psi blows up as h -> 0
                lo = right
                while lo > 1e-300 and F(lo, lev) >= 0:
                    lo *= 0.5
            return _bisect_first_feasible(lambda h: F(h, lev), lo, right)
    return cfg.h0  # unreachable when Omega_0 holds; kept as a safe fallback


def deterministic_hw(px_model: Callable[[float], float], w_spec: ModulusSpec,
                     n: int, sigma: float, cfg: GridConfig) -> float:
    """h_w = min{h in (0, h0] : (psi(h) / E L(h))^(1/2) <= w(h)} with
    E L(h) = n * P_X[x-h, x+h] / sigma^2.

    px_model maps h to the closed-form design probability P_X([x-h, x+h]).
    Raises TooFewSamples when n < sigma^2 / (P_X[I_{h0}] w(h0)^2), the
    threshold below which h_w does not exist.
    """

    def G(h):
        el = n * px_model(h) / sigma**2
        return el * float(w_spec.w(h)) ** 2 - psi(h, cfg)

    if G(cfg.h0) < 0:
        raise TooFewSamples(
            f"need n >= sigma^2/(P_X[I_h0] w(h0)^2); got n={n}"
        )
    lo = cfg.h0
    while G(lo) >= 0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0  # expected occupation does not vanish near 0; degenerate design
    return _bisect_first_feasible(G, lo, cfg.h0)


# ------------------------------------------------------------------
# report assembly
# ------------------------------------------------------------------

@dataclass
class RateReport:
    """Random and deterministic rate diagnostics for one sample.

    h_w_emp is the empirical continuum bandwidth H_w and h_w its deterministic
    equivalent; rate_random = w(H_w), rate_det = w(h_w), ratio their quotient
    when both exist.  h_star and omega_prime are grid-oracle diagnostics
    computed with the same modulus.
    """

    n: int
    omega_0: bool
    omega_prime: bool
    h_star: Optional[float] = None
    h_w_emp: Optional[float] = None
    h_w: Optional[float] = None
    rate_random: Optional[float] = None
    rate_det: Optional[float] = None
    ratio: Optional[float] = None


def rate_report(sample: SamplePath, cfg: GridConfig, w_spec: ModulusSpec,
                px_model: Optional[Callable[[float], float]] = None) -> RateReport:
    """Assemble H*, H_w, h_w and the rate ratio; undefined pieces carry None.

    The empirical part needs a constant sigma; the deterministic part needs a
    closed-form design probability.  Omega_0 failures are flagged, never
    raised, so campaign rows are retained.
    """
    from .model_core import build_grid  # local import keeps module load cheap
    from .errors import GridEmpty

    n = sample.n_stop
    try:
        profile = build_grid(sample, cfg)
    except GridEmpty:
        return RateReport(n=n, omega_0=False, omega_prime=False)

    h_star = oracle_bandwidth(profile, w_spec, cfg)
    omega_p = omega_prime_event(profile, w_spec, cfg)
    l_h0 = float(profile.l_values[0])
    omega_0 = l_h0 ** -0.5 <= float(w_spec.w(cfg.h0))

    report = RateReport(n=n, omega_0=bool(omega_0), omega_prime=omega_p, h_star=h_star)

    sig = sample.sigma
    if omega_0 and np.allclose(sig, sig[0], rtol=1e-12, atol=0.0):
        hw_emp = empirical_hw(sample, cfg, w_spec)
        if hw_emp is not None:
            report.h_w_emp = hw_emp
            report.rate_random = float(w_spec.w(hw_emp))

    if px_model is not None:
        try:
            hw_det = deterministic_hw(px_model, w_spec, n, float(sig[0]), cfg)
        except TooFewSamples:
            hw_det = None
        if hw_det is not None:
            report.h_w = hw_det
            report.rate_det = float(w_spec.w(hw_det))

    if report.rate_random is not None and report.rate_det is not None:
        report.ratio = report.rate_random / report.rate_det
    return report
