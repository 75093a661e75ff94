"""Bandwidth selection: the level bandwidth H_u, the adaptive selection rule,
and a literal brute-force selector kept as a testing oracle.

The rule picks the largest grid bandwidth h >= H_{u0} whose estimate stays
within nu * (psi(h')/L(h'))^(1/2) of f_hat(h') for every grid h' in
[H_{u0}, h].  Both endpoints of the interval are included, as is the
degenerate comparison h' = h; deviations exactly at the threshold count as
admissible.  The admissible set need not be an interval, so the maximum is
taken literally over all admissible candidates, not over the largest prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model_core import (
    GridConfig,
    OccupationProfile,
    SamplePath,
    build_grid,
    grid_statistics,
    kernel_estimate,
    occupation_time,
    psi,
)


@dataclass
class SelectionResult:
    """Outcome of one bandwidth selection.

    `defined` is False when even h0 fails the level condition at u0 (the event
    {L(h0)^(-1/2) <= u0} does not hold); all other fields are then None.
    admissible_flags traces the selection condition per grid element;
    elements below the anchor H_{u0} are never candidates and read False.
    """

    defined: bool
    h_hat: Optional[float] = None
    f_hat: Optional[float] = None
    h_u0: Optional[float] = None
    admissible_flags: Optional[np.ndarray] = None


def bandwidth_at_level(profile: OccupationProfile, u: float) -> Optional[float]:
    """H_u = min{h in grid : (psi(h)/L(h))^(1/2) <= u}, or None when h0 already fails.

    The level (psi/L)^(1/2) increases strictly along the grid (psi grows, L
    shrinks), so the feasible set is a prefix and its minimum is the last
    feasible element.  Since psi(h0) = 1, feasibility of h0 is exactly the
    event {L(h0)^(-1/2) <= u}.
    """
    if u <= 0:
        raise ValueError("level u must be positive")
    feasible = profile.levels <= u
    if not feasible[0]:
        return None
    j = int(np.max(np.flatnonzero(feasible)))
    return float(profile.bandwidths[j])


def _anchor_index(profile: OccupationProfile, u0: float) -> Optional[int]:
    feasible = profile.levels <= u0
    if not feasible[0]:
        return None
    return int(np.max(np.flatnonzero(feasible)))


def select_bandwidth(sample: SamplePath, cfg: GridConfig) -> SelectionResult:
    """Run the selection rule and return the selected bandwidth and estimate.

    Uses the cached grid statistics for the pairwise scan; the reported
    estimate is recomputed through `kernel_estimate` so it matches the
    brute-force oracle bit for bit.
    """
    stats = grid_statistics(sample, cfg)
    prof = stats.profile
    j_anchor = _anchor_index(prof, cfg.u0)
    if j_anchor is None:
        return SelectionResult(defined=False)

    thresholds = cfg.nu * prof.levels
    f_hat = stats.f_hat
    flags = np.zeros(len(prof), dtype=bool)
    for j in range(j_anchor + 1):
        flags[j] = np.all(
            np.abs(f_hat[j] - f_hat[j : j_anchor + 1]) <= thresholds[j : j_anchor + 1]
        )
    j_hat = int(np.argmax(flags))  # first admissible = largest bandwidth; anchor always passes

    h_hat = float(prof.bandwidths[j_hat])
    return SelectionResult(
        defined=True,
        h_hat=h_hat,
        f_hat=kernel_estimate(sample, cfg.x_point, h_hat),
        h_u0=float(prof.bandwidths[j_anchor]),
        admissible_flags=flags,
    )


def brute_force_select(sample: SamplePath, cfg: GridConfig) -> SelectionResult:
    """Literal evaluation of the defining set of the selection rule.

    For every candidate h >= H_{u0} in the grid, every h' in [H_{u0}, h] is
    checked pairwise with freshly recomputed kernel estimates and occupation
    times (no caching, no early exit); the maximum admissible h wins.
    O(|grid|^2) estimator evaluations; testing oracle for `select_bandwidth`.
    """
    grid = build_grid(sample, cfg)
    hs = [float(h) for h in grid.bandwidths]

    def level(h):
        return np.sqrt(psi(h, cfg) / occupation_time(sample, cfg.x_point, h))

    if level(hs[0]) > cfg.u0:
        return SelectionResult(defined=False)
    feasible = [j for j, h in enumerate(hs) if level(h) <= cfg.u0]
    anchor = max(feasible)  # min over bandwidths = max over grid indices

    flags = np.zeros(len(hs), dtype=bool)
    admissible = []
    for j in range(anchor + 1):
        ok = True
        for jp in range(j, anchor + 1):
            gap = abs(
                kernel_estimate(sample, cfg.x_point, hs[j])
                - kernel_estimate(sample, cfg.x_point, hs[jp])
            )
            if gap > cfg.nu * level(hs[jp]):
                ok = False
        flags[j] = ok
        if ok:
            admissible.append(j)
    j_hat = min(admissible)
    return SelectionResult(
        defined=True,
        h_hat=hs[j_hat],
        f_hat=kernel_estimate(sample, cfg.x_point, hs[j_hat]),
        h_u0=hs[anchor],
        admissible_flags=flags,
    )
