"""Transmit-MA placement for the communication stage.

The placement objective is the worst secrecy rate over the uncertainty-region
samples. Each sample's rate is smooth in the antenna coordinates, but the
robust beamformer equalizes the leakage across several samples, so the min is
kinked exactly at the incumbent and a single forward-difference gradient of
the min is not an ascent direction (the line search along it returns zero).
The coordinate pass therefore linearizes every sample's rate separately and
asks an LP for the point that maximizes the worst linearized piece, subject to
the box and the linearized pairwise-distance rows; the step along that
direction is then chosen on the true piecewise objective. Because the
linearized distance rows inner-approximate the true spacing constraint and
both segment endpoints satisfy them, every visited layout stays feasible.

The stage is pessimistic about the sensing outcome: it re-runs the noisy
estimation several times, keeps the estimate whose robust design protects the
secrecy rate worst, and only then alternates beamforming and coordinate
passes for that worst case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beamforming import (
    BeamformerSolution,
    robust_beamform,
    sample_uncertainty,
    secrecy_rate,
    worst_case_secrecy,
)
from .errors import DegenerateLinearizationError, InfeasibleRegionError, InvalidPairError
from .geometry import (
    ArrayLayout,
    SceneConstants,
    Wavevector,
    comm_channel,
    echo_channel,
    path_gain,
)
from .sensing import (
    UncertaintyRegion,
    crb_closed_form,
    mle_estimate,
    probe_dft,
    synthesize_echo,
    uncertainty_region,
)
from .solver import LinearProgram, solve_lp

__all__ = [
    "CommOptConfig",
    "PairConstraintSystem",
    "CommOptResult",
    "pair_index",
    "build_pair_constraints",
    "fd_gradient",
    "fd_jacobian",
    "ascent_direction",
    "bundle_direction",
    "line_search",
    "optimize_coordinate_block",
    "select_worst_estimate",
    "optimize_comm_stage",
]


@dataclass(frozen=True)
class CommOptConfig:
    """Knobs of the communication-stage optimization."""

    delta_block: float = 1e-4
    delta_outer: float = 1e-4
    max_outer: int = 80
    max_inner: int = 30
    line_points: int = 100
    fd_step_wavelengths: float = 1e-4
    num_trials: int = 20
    hull_grid: int = 5
    eval_grid: int = 21
    region_scale: float = 3.0
    seed: int = 0
    beam_tol: float = 1e-6
    beam_max_iter: int = 100


@dataclass(frozen=True)
class PairConstraintSystem:
    """Rows matrix @ coords >= thresholds, one row per antenna pair."""

    matrix: np.ndarray
    thresholds: np.ndarray


@dataclass(frozen=True)
class CommOptResult:
    x_t: np.ndarray
    y_t: np.ndarray
    beamformer: BeamformerSolution
    worst_case_rate: float
    chosen_estimate: Wavevector
    region: UncertaintyRegion
    rate_trace: tuple
    converged: bool
    trial_rates: tuple

    def layout(self, region_side: float, min_spacing: float) -> ArrayLayout:
        return ArrayLayout(np.column_stack([self.x_t, self.y_t]), region_side, min_spacing)


def pair_index(a1: int, a2: int, n: int) -> int:
    """1-based row index of the ordered antenna pair (a1 < a2)."""
    if not 1 <= a1 < a2 <= n:
        raise InvalidPairError(f"need 1 <= a1 < a2 <= {n}, got ({a1}, {a2})")
    return (2 * n - a1) * (a1 - 1) // 2 + a2 - a1


def build_pair_constraints(
    positions: np.ndarray, min_spacing: float, axis: int
) -> PairConstraintSystem:
    """Linearized pairwise-distance rows for one coordinate axis.

    Row chi(a1, a2): d_axis * (z_a1 - z_a2) >= D * ||t_a1 - t_a2|| - d_other^2
    with all differences taken at the linearization point, so the current
    coordinates satisfy the system exactly when the true distances do.
    """
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    rows = n * (n - 1) // 2
    matrix = np.zeros((rows, n))
    thresholds = np.zeros(rows)
    for a1 in range(1, n + 1):
        for a2 in range(a1 + 1, n + 1):
            delta = pos[a1 - 1] - pos[a2 - 1]
            dist = float(np.hypot(delta[0], delta[1]))
            if dist < 1e-12:
                raise DegenerateLinearizationError(
                    f"antennas {a1} and {a2} coincide; cannot linearize their spacing"
                )
            chi = pair_index(a1, a2, n) - 1
            matrix[chi, a1 - 1] = delta[axis]
            matrix[chi, a2 - 1] = -delta[axis]
            thresholds[chi] = min_spacing * dist - delta[1 - axis] ** 2
    return PairConstraintSystem(matrix, thresholds)


def fd_gradient(objective, point: np.ndarray, step: float) -> np.ndarray:
    """Forward-difference gradient, one extra objective call per coordinate."""
    base = objective(point)
    grad = np.empty(point.size)
    for k in range(point.size):
        probe = point.copy()
        probe[k] += step
        grad[k] = (objective(probe) - base) / step
    return grad


def fd_jacobian(objective, point: np.ndarray, step: float) -> np.ndarray:
    """Forward differences of a vector objective, one row per output piece."""
    base = np.atleast_1d(np.asarray(objective(point), dtype=float))
    jac = np.empty((base.size, point.size))
    for k in range(point.size):
        probe = point.copy()
        probe[k] += step
        jac[:, k] = (np.asarray(objective(probe), dtype=float) - base) / step
    return jac


def ascent_direction(
    gradient: np.ndarray,
    constraints: PairConstraintSystem,
    box_lo: np.ndarray,
    box_hi: np.ndarray,
) -> np.ndarray:
    """Feasible point maximizing the linearized gain; LP over the inner polytope."""
    problem = LinearProgram(
        gradient, box_lo, box_hi, constraints.matrix, constraints.thresholds
    )
    report = solve_lp(problem)
    if report.status == "infeasible":
        raise InfeasibleRegionError("linearized placement polytope is empty")
    return report.solution


def bundle_direction(
    incumbent: np.ndarray,
    values: np.ndarray,
    jacobian: np.ndarray,
    constraints: PairConstraintSystem,
    box_lo: np.ndarray,
    box_hi: np.ndarray,
) -> np.ndarray:
    """Feasible point maximizing the worst linearized piece.

    Variables (d, t): maximize t subject to each piece's first-order model
    staying above t, measured from the current worst value:

        t <= values_f - min(values) + jacobian_f . (d - incumbent)

    plus the spacing rows and the box on d. At d = incumbent the best t is 0,
    so the LP value is the predicted worst-piece gain and is never negative.
    A single piece reduces to the plain linearized-gain LP.
    """
    values = np.atleast_1d(np.asarray(values, dtype=float))
    jac = np.atleast_2d(np.asarray(jacobian, dtype=float))
    n = incumbent.size
    gap = values - values.min()
    rows = np.hstack([jac, -np.ones((values.size, 1))])
    rhs = jac @ incumbent - gap
    spacing = np.hstack(
        [constraints.matrix, np.zeros((constraints.matrix.shape[0], 1))]
    )
    objective = np.zeros(n + 1)
    objective[-1] = 1.0
    span = float(np.abs(jac).sum() * (box_hi - box_lo).max() + gap.max() + 1.0)
    problem = LinearProgram(
        objective,
        np.concatenate([box_lo, [-span]]),
        np.concatenate([box_hi, [span]]),
        np.vstack([rows, spacing]),
        np.concatenate([rhs, constraints.thresholds]),
    )
    report = solve_lp(problem)
    if report.status == "infeasible":
        raise InfeasibleRegionError("linearized placement polytope is empty")
    return report.solution[:n]


def line_search(objective, incumbent: np.ndarray, direction: np.ndarray, points: int = 100):
    """Best step on {0, 1/points, ..., 1} toward the direction point.

    Returns (step, value); ties keep the smallest step, so a flat objective
    stays put.
    """
    best_s, best_val = 0.0, objective(incumbent)
    offset = direction - incumbent
    for k in range(1, points + 1):
        s = k / points
        val = objective(incumbent + s * offset)
        if val > best_val:
            best_s, best_val = s, val
    return best_s, best_val


def optimize_coordinate_block(
    positions: np.ndarray,
    axis: int,
    objective,
    region_side: float,
    min_spacing: float,
    cfg: CommOptConfig,
    wavelength: float,
):
    """Feasible-direction passes over one axis until the gain stalls.

    objective takes the full (N, 2) position array and returns either a
    scalar (maximized directly) or a vector of per-sample values whose
    minimum is maximized. The incumbent is never replaced by a worse point,
    so the returned value is >= the entering one.
    """
    pos = np.asarray(positions, dtype=float).copy()
    n = pos.shape[0]
    step = cfg.fd_step_wavelengths * wavelength
    box_lo = np.zeros(n)
    box_hi = np.full(n, region_side)

    def axis_pieces(coords):
        trial = pos.copy()
        trial[:, axis] = coords
        return np.atleast_1d(np.asarray(objective(trial), dtype=float))

    def axis_worst(coords):
        return float(axis_pieces(coords).min())

    rate = axis_worst(pos[:, axis])
    for _ in range(cfg.max_inner):
        coords = pos[:, axis].copy()
        constraints = build_pair_constraints(pos, min_spacing, axis)
        pieces = axis_pieces(coords)
        if pieces.size == 1:
            grad = fd_gradient(axis_worst, coords, step)
            target = ascent_direction(grad, constraints, box_lo, box_hi)
        else:
            jac = fd_jacobian(axis_pieces, coords, step)
            target = bundle_direction(coords, pieces, jac, constraints, box_lo, box_hi)
        s, value = line_search(axis_worst, coords, target, cfg.line_points)
        if value > rate:
            pos[:, axis] = coords + s * (target - coords)
        gained = value - rate
        rate = max(rate, value)
        if gained <= cfg.delta_block * max(abs(rate), 1e-15):
            break
    return pos, rate


class _RateEvaluator:
    """Worst-case secrecy over fixed sample wavevectors as layouts move."""

    def __init__(self, sample_wavevectors, legit, zeta_c, zeta_e, constants):
        self.alphas = sample_wavevectors[:, 0]
        self.betas = sample_wavevectors[:, 1]
        self.legit = legit
        self.zeta_c = zeta_c
        self.zeta_e = zeta_e
        self.k = 2.0 * math.pi / constants.wavelength
        self.noise_c = constants.noise_comm
        self.noise_e = constants.noise_eve

    def pieces(self, positions: np.ndarray, omega: np.ndarray) -> np.ndarray:
        x, y = positions[:, 0], positions[:, 1]
        h_c = self.zeta_c * np.exp(1j * self.k * (x * self.legit.alpha + y * self.legit.beta))
        phases = self.alphas[:, None] * x[None, :] + self.betas[:, None] * y[None, :]
        h_e = self.zeta_e * np.exp(1j * self.k * phases)
        snr_c = abs(h_c.conj() @ omega) ** 2 / self.noise_c
        snr_e = np.abs(h_e.conj() @ omega) ** 2 / self.noise_e
        return np.log2(1.0 + snr_c) - np.log2(1.0 + snr_e)

    def rate(self, positions: np.ndarray, omega: np.ndarray) -> float:
        return max(0.0, float(self.pieces(positions, omega).min()))


def select_worst_estimate(
    constants: SceneConstants,
    sensing_tx: ArrayLayout,
    sensing_rx: ArrayLayout,
    truth: Wavevector,
    legit: Wavevector,
    cfg: CommOptConfig,
):
    """Monte Carlo over the sensing stage, keeping the most damaging estimate.

    Each trial re-runs the noisy echo simulation and estimation, designs the
    robust beamformer for the resulting uncertainty region at the initial
    (sensing) layout, and scores it against the true eavesdropper channel.
    The estimate whose trial scores lowest is returned with its region.
    """
    probe = probe_dft(sensing_tx.count, constants.snapshots, constants.sensing_power)
    zeta_s = path_gain("sensing", constants)
    zeta_c = path_gain("legit", constants).value
    zeta_e = path_gain("eve", constants).value
    crb = crb_closed_form(sensing_tx, sensing_rx, constants)
    h_c = comm_channel(sensing_tx, legit, zeta_c, constants.wavelength)
    h_e_true = comm_channel(sensing_tx, truth, zeta_e, constants.wavelength)
    channel = echo_channel(sensing_tx, sensing_rx, truth, zeta_s, constants.wavelength)
    best = None
    rates = []
    for trial in range(cfg.num_trials):
        obs = synthesize_echo(channel, probe, constants.noise_sensing, [cfg.seed, trial])
        estimate = mle_estimate(
            obs, probe, sensing_tx, sensing_rx, constants.wavelength
        )
        region = uncertainty_region(estimate, crb, cfg.region_scale)
        samples = sample_uncertainty(
            region, sensing_tx, zeta_e, constants.wavelength, cfg.hull_grid
        )
        sol = robust_beamform(
            h_c, samples, constants.comm_power, constants.noise_comm,
            constants.noise_eve, cfg.beam_tol, cfg.beam_max_iter,
        )
        rate = secrecy_rate(h_c, h_e_true, sol.vector, constants.noise_comm, constants.noise_eve)
        rates.append(rate)
        if best is None or rate < best[0]:
            best = (rate, estimate, region)
    _, estimate, region = best
    return estimate, region, tuple(rates)


def optimize_comm_stage(
    sensing_tx: ArrayLayout,
    sensing_rx: ArrayLayout,
    constants: SceneConstants,
    truth: Wavevector,
    legit: Wavevector,
    cfg: CommOptConfig = CommOptConfig(),
    estimate_override: Wavevector | None = None,
    region_override: UncertaintyRegion | None = None,
) -> CommOptResult:
    """Worst-estimate selection, then alternating beamforming and placement.

    Transmit coordinates start from the sensing layout. Each outer iteration
    re-designs the beamformer for the current layout (kept only if it does not
    lower the worst-case rate), then runs one feasible-direction pass per
    coordinate axis with the beamformer held fixed.

    estimate_override pins the estimate instead of running the Monte Carlo
    selection; region_override additionally pins the uncertainty region (for
    sweeps that control it directly).
    """
    trial_rates = ()
    if region_override is not None:
        region = region_override
        estimate = estimate_override or region.center
    elif estimate_override is not None:
        estimate = estimate_override
        crb = crb_closed_form(sensing_tx, sensing_rx, constants)
        region = uncertainty_region(estimate, crb, cfg.region_scale)
    else:
        estimate, region, trial_rates = select_worst_estimate(
            constants, sensing_tx, sensing_rx, truth, legit, cfg
        )

    zeta_c = path_gain("legit", constants).value
    zeta_e = path_gain("eve", constants).value
    wavelength = constants.wavelength
    positions = np.array(sensing_tx.positions, dtype=float)
    region_side = sensing_tx.region_side
    min_spacing = sensing_tx.min_spacing

    hull_wavevectors = sample_uncertainty(
        region, sensing_tx, zeta_e, wavelength, cfg.hull_grid
    ).wavevectors
    evaluator = _RateEvaluator(hull_wavevectors, legit, zeta_c, zeta_e, constants)

    omega = None
    beam = None
    rate = -math.inf
    trace = []
    converged = False
    for _ in range(cfg.max_outer):
        # first outer measures its gain from zero rate, so only a huge
        # threshold can stop the loop before positions had one real chance
        prev = rate if trace else 0.0
        layout = ArrayLayout(positions, region_side, min_spacing)
        h_c = comm_channel(layout, legit, zeta_c, wavelength)
        samples = sample_uncertainty(region, layout, zeta_e, wavelength, cfg.hull_grid)
        sol = robust_beamform(
            h_c, samples, constants.comm_power, constants.noise_comm,
            constants.noise_eve, cfg.beam_tol, cfg.beam_max_iter,
        )
        cand = float(evaluator.pieces(positions, sol.vector).min())
        if omega is None or cand >= rate:
            omega, beam, rate = sol.vector, sol, cand

        positions, rate = optimize_coordinate_block(
            positions, 0, lambda p: evaluator.pieces(p, omega),
            region_side, min_spacing, cfg, wavelength,
        )
        positions, rate = optimize_coordinate_block(
            positions, 1, lambda p: evaluator.pieces(p, omega),
            region_side, min_spacing, cfg, wavelength,
        )
        trace.append(max(0.0, rate))
        if rate - prev <= cfg.delta_outer * max(1.0, abs(prev)):
            converged = True
            break

    final_layout = ArrayLayout(positions, region_side, min_spacing)
    h_c = comm_channel(final_layout, legit, zeta_c, wavelength)
    dense_rate = worst_case_secrecy(
        h_c, final_layout, zeta_e, region, omega,
        constants.noise_comm, constants.noise_eve, wavelength, cfg.eval_grid,
    )
    return CommOptResult(
        x_t=positions[:, 0].copy(),
        y_t=positions[:, 1].copy(),
        beamformer=beam,
        worst_case_rate=dense_rate,
        chosen_estimate=estimate,
        region=region,
        rate_trace=tuple(trace),
        converged=converged,
        trial_rates=trial_rates,
    )
