"""Fixed-array baselines, antenna selection, and simple beamformers.

The comparison schemes fall into three groups: fixed grids (half-wavelength
pitch, or stretched corner-to-corner to fill the region), subset selection
out of a denser candidate grid, and eavesdropper-blind beamformers (maximum
ratio transmission, with or without null-space artificial noise). The
aperture-limited estimation bound for a square region closes the set; an
optimized layout can approach it but never beat it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .comm_placement import CommOptConfig, optimize_coordinate_block
from .errors import ConfigError, InfeasibleRegionError, SingularGeometryError
from .geometry import ArrayLayout, SceneConstants, Wavevector, comm_channel, path_gain

__all__ = [
    "BENCHMARK_TAGS",
    "BenchmarkKind",
    "upa_layout",
    "rect_layout",
    "antenna_selection",
    "mrt_beamformer",
    "mrt_zf_an_rates",
    "legit_gain_positions",
    "theoretical_crb_bound",
]

BENCHMARK_TAGS = (
    "FPA-H",
    "FPA-F",
    "AS",
    "MRT",
    "MRT-ZF",
    "Estimated-as-True",
    "Ideal",
)

# C(40, 20) ~ 1.4e11 subsets is far beyond desk scale; cap exhaustive search
EXHAUSTIVE_CAP = 1_000_000


@dataclass(frozen=True)
class BenchmarkKind:
    """Named comparison scheme."""

    tag: str

    def __post_init__(self):
        if self.tag not in BENCHMARK_TAGS:
            raise ConfigError(
                f"unknown benchmark tag {self.tag!r}; expected one of {BENCHMARK_TAGS}"
            )


def rect_layout(
    rows: int,
    cols: int,
    spacing: float,
    region_side: float,
    min_spacing: float | None = None,
) -> ArrayLayout:
    """rows x cols grid anchored at the origin corner of the region."""
    if rows < 1 or cols < 1:
        raise ConfigError(f"grid must be at least 1x1, got {rows}x{cols}")
    extent = (max(rows, cols) - 1) * spacing
    if extent > region_side + 1e-12:
        raise InfeasibleRegionError(
            f"{rows}x{cols} grid at pitch {spacing} spans {extent:.4g}, "
            f"beyond the region side {region_side:.4g}"
        )
    positions = np.array(
        [[i * spacing, j * spacing] for i in range(rows) for j in range(cols)],
        dtype=float,
    )
    if min_spacing is None:
        min_spacing = spacing if rows * cols > 1 else 0.0
    return ArrayLayout(positions, region_side, min_spacing)


def upa_layout(
    count: int,
    spacing: float,
    region_side: float,
    min_spacing: float | None = None,
) -> ArrayLayout:
    """Square grid of `count` antennas anchored at the origin corner."""
    side_count = math.isqrt(count)
    if side_count * side_count != count:
        raise ConfigError(f"count must be a perfect square, got {count}")
    return rect_layout(side_count, side_count, spacing, region_side, min_spacing)


def _subset_layout(candidate: ArrayLayout, indices) -> ArrayLayout:
    return ArrayLayout(
        candidate.positions[list(indices)], candidate.region_side, candidate.min_spacing
    )


def antenna_selection(
    candidate: ArrayLayout,
    choose: int,
    objective,
    mode: str = "greedy",
) -> tuple[ArrayLayout, float]:
    """Subset of the candidate grid minimizing the objective, with its score.

    objective maps an ArrayLayout to a float; a geometry the objective cannot
    score (singular estimation geometry) counts as +inf instead of aborting,
    so degenerate pools still return a deterministic subset (whose reported
    score is then +inf). Greedy mode drops one antenna at a time (backward
    elimination); exhaustive mode scores every subset and is capped because
    the subset count explodes combinatorially.
    """
    total = candidate.count
    if not 1 <= choose <= total:
        raise ConfigError(f"cannot choose {choose} antennas out of {total}")

    def score(indices) -> float:
        try:
            return float(objective(_subset_layout(candidate, indices)))
        except SingularGeometryError:
            return math.inf

    if choose == total:
        return candidate, score(range(total))

    if mode == "exhaustive":
        count = math.comb(total, choose)
        if count > EXHAUSTIVE_CAP:
            raise ConfigError(
                f"{count} subsets exceed the exhaustive cap {EXHAUSTIVE_CAP}; "
                "use greedy mode"
            )
        best_value = math.inf
        best = None
        for indices in combinations(range(total), choose):
            value = score(indices)
            if best is None or value < best_value:
                best_value, best = value, indices
        return _subset_layout(candidate, best), best_value

    if mode == "greedy":
        keep = list(range(total))
        value = math.inf
        while len(keep) > choose:
            best_value = math.inf
            best_drop = None
            for drop in keep:
                trial = score([i for i in keep if i != drop])
                if best_drop is None or trial < best_value:
                    best_value, best_drop = trial, drop
            keep.remove(best_drop)
            value = best_value
        return _subset_layout(candidate, keep), value

    raise ConfigError(f"unknown selection mode {mode!r}")


def mrt_beamformer(h_c: np.ndarray, power: float) -> np.ndarray:
    """Full-power beam aligned with the legitimate channel."""
    h = np.asarray(h_c, dtype=complex)
    norm = float(np.linalg.norm(h))
    if norm == 0.0:
        raise ConfigError("legitimate channel is zero; beam direction undefined")
    return math.sqrt(power) * h / norm


def mrt_zf_an_rates(
    h_c: np.ndarray,
    h_e: np.ndarray,
    power: float,
    split: float,
    noise_comm: float,
    noise_eve: float,
    rng_seed: int,
    draws: int = 100,
) -> float:
    """Average secrecy rate of the MRT beam plus null-space artificial noise.

    The information beam carries split*power along the legitimate channel;
    the remaining power rides an isotropic direction in the channel's null
    space, so the legitimate rate is untouched by construction while the
    eavesdropper sees the noise as interference.
    """
    h_c = np.asarray(h_c, dtype=complex)
    h_e = np.asarray(h_e, dtype=complex)
    if h_c.size < 2:
        raise ConfigError("artificial noise needs at least two antennas")
    if not 0.0 < split <= 1.0:
        raise ConfigError(f"power split must be in (0, 1], got {split}")
    norm = float(np.linalg.norm(h_c))
    if norm == 0.0:
        raise ConfigError("legitimate channel is zero; beam direction undefined")
    unit = h_c / norm
    rate_legit = math.log2(1.0 + split * power * norm**2 / noise_comm)
    overheard = split * power * abs(h_e.conj() @ unit) ** 2
    an_power = (1.0 - split) * power

    rng = np.random.default_rng(rng_seed)
    rates = []
    for _ in range(draws):
        jam = 0.0
        if an_power > 0.0:
            while True:
                raw = rng.standard_normal(h_c.size) + 1j * rng.standard_normal(h_c.size)
                an = raw - unit * (unit.conj() @ raw)
                an_norm = float(np.linalg.norm(an))
                if an_norm > 1e-12:
                    break
            jam = an_power * abs(h_e.conj() @ (an / an_norm)) ** 2
        rate_eve = math.log2(1.0 + overheard / (jam + noise_eve))
        rates.append(max(0.0, rate_legit - rate_eve))
    return float(np.mean(rates))


def legit_gain_positions(
    start: ArrayLayout,
    legit: Wavevector,
    constants: SceneConstants,
    cfg: CommOptConfig = CommOptConfig(),
) -> tuple[ArrayLayout, float]:
    """Coordinate passes maximizing the legitimate array gain.

    With a single line-of-sight path every channel entry has the same
    magnitude, so the gain is position-independent: the passes stall after
    one round and can change the layout only by inconsequential rounding
    drift. The hook keeps the eavesdropper-blind schemes' plumbing uniform
    and becomes active the moment the channel model gains
    position-dependent magnitude.
    """
    zeta = path_gain("legit", constants).value

    def gain(positions):
        layout = ArrayLayout(positions, start.region_side, start.min_spacing)
        h = comm_channel(layout, legit, zeta, constants.wavelength)
        return float(np.real(h.conj() @ h))

    positions = np.array(start.positions)
    positions, _ = optimize_coordinate_block(
        positions, 0, gain, start.region_side, start.min_spacing, cfg, constants.wavelength
    )
    positions, value = optimize_coordinate_block(
        positions, 1, gain, start.region_side, start.min_spacing, cfg, constants.wavelength
    )
    return ArrayLayout(positions, start.region_side, start.min_spacing), value


def theoretical_crb_bound(
    constants: SceneConstants, region_side: float, receive_count: int
) -> float:
    """Aperture-limited estimation floor for a square placement region."""
    if region_side <= 0.0:
        raise ConfigError(f"region side must be positive, got {region_side}")
    gain = path_gain("sensing", constants)
    denom = (
        4.0
        * receive_count
        * constants.sensing_power
        * constants.snapshots
        * math.pi**2
        * region_side**2
        * abs(gain.value) ** 2
    )
    return constants.wavelength**2 * constants.noise_sensing / denom
