"""Sensing-stage antenna placement: minimize the worst-axis CRB by block SCA.

The CRB of each wavevector axis is a constant G divided by the profiled
coordinate-moment form eta_i (variance of the axis minus the squared covariance
over the other axis's variance, summed over both arrays). Maximizing the worst
axis bound eta = min(eta_1, eta_2) therefore minimizes the worst-axis CRB.

The solver alternates over the four coordinate blocks (transmit x, transmit y,
receive x, receive y). For one block the two eta constraints become convex
after lower-bounding the block's own variance by its supporting Taylor line at
the current iterate, and the pairwise-distance floor is restored by the usual
inner linearization; each block then runs a short SCA loop of interior-point
solves. Both approximations under-estimate the true constraint functions, so
every accepted step can only increase the true eta: the outer trace is
monotone by construction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLinearizationError, InfeasibleRegionError
from .geometry import ArrayLayout, SceneConstants
from .sensing import CrbPair, centering_matrix, coord_covariance, coord_variance, _crb_prefactor
from .solver import ConvexSubproblem, QuadRow, solve_convex

__all__ = [
    "AoConfig",
    "SensingOptState",
    "SensingResult",
    "BLOCKS",
    "eta_bounds",
    "random_feasible_positions",
    "build_block_subproblem",
    "sca_block_loop",
    "optimize_sensing_layout",
]

BLOCKS = ("x_t", "y_t", "x_r", "y_r")


@dataclass(frozen=True)
class AoConfig:
    """Knobs of the alternating optimization (thresholds are relative gains)."""

    delta_outer: float = 1e-4
    delta_inner: float = 1e-5
    max_outer: int = 100
    max_inner: int = 30
    num_inits: int = 5
    seed: int = 0
    solver_tol: float = 1e-6
    solver_max_iter: int = 200


@dataclass
class SensingOptState:
    """Mutable coordinates of both arrays plus the current worst-axis bound."""

    x_t: np.ndarray
    y_t: np.ndarray
    x_r: np.ndarray
    y_r: np.ndarray
    region_side: float
    min_spacing: float
    eta_bar: float = 0.0
    history: list = field(default_factory=list)  # (outer, block, eta_bar, wall_ms)

    def coords(self, block: str) -> np.ndarray:
        return getattr(self, block)

    def set_coords(self, block: str, values: np.ndarray) -> None:
        setattr(self, block, np.asarray(values, dtype=float))

    def tx_layout(self) -> ArrayLayout:
        return ArrayLayout(
            np.column_stack([self.x_t, self.y_t]), self.region_side, self.min_spacing
        )

    def rx_layout(self) -> ArrayLayout:
        return ArrayLayout(
            np.column_stack([self.x_r, self.y_r]), self.region_side, self.min_spacing
        )


@dataclass(frozen=True)
class SensingResult:
    """Winning restart of the placement optimization."""

    tx: ArrayLayout
    rx: ArrayLayout
    eta_bar: float
    crb: CrbPair
    threshold_met: bool
    converged: bool
    outer_traces: tuple  # per restart, tuple of eta values per outer iteration
    history: tuple  # block-level records of the winning restart
    best_restart: int


def eta_bounds(x_t, y_t, x_r, y_r) -> tuple[float, float]:
    """The two profiled moment forms (eta_1 for alpha, eta_2 for beta)."""
    vx = coord_variance(x_t) + coord_variance(x_r)
    vy = coord_variance(y_t) + coord_variance(y_r)
    c = coord_covariance(x_t, y_t) + coord_covariance(x_r, y_r)
    eta1 = vx - (c * c / vy if vy > 0.0 else 0.0)
    eta2 = vy - (c * c / vx if vx > 0.0 else 0.0)
    return eta1, eta2


def _jittered_grid(rng, count, region_side, min_spacing):
    """Regular grid start with the leftover pitch slack spent on jitter."""
    rows = math.ceil(math.sqrt(count))
    cols = math.ceil(count / rows)
    pitch_y = region_side / (rows - 1) if rows > 1 else region_side
    pitch_x = region_side / (cols - 1) if cols > 1 else region_side
    pitch = min(pitch_x, pitch_y)
    if pitch < min_spacing:
        raise InfeasibleRegionError(
            f"could not place {count} antennas with spacing {min_spacing} in a "
            f"{region_side} square: the densest regular grid has pitch {pitch:.6g}"
        )
    cells = [(c * pitch_x, r * pitch_y) for r in range(rows) for c in range(cols)]
    grid = np.array(cells[:count])
    # each point stays within jitter of its cell, so neighbours keep
    # pitch - 2*jitter > min_spacing even after clipping to the box
    jitter = 0.49 * (pitch - min_spacing)
    pos = grid + rng.uniform(-jitter, jitter, size=(count, 2))
    return np.clip(pos, 0.0, region_side)


def random_feasible_positions(
    rng: np.random.Generator,
    count: int,
    region_side: float,
    min_spacing: float,
    max_attempts: int = 10_000,
) -> np.ndarray:
    """Sequential rejection sampling of spacing-feasible uniform positions.

    Dense-but-feasible boxes can exhaust rejection sampling (the free volume
    collapses as antennas accumulate), so running out of draws falls back to
    a jittered regular grid; only a box with no feasible grid raises.
    """
    placed = np.empty((count, 2))
    n_placed = 0
    for _ in range(max_attempts):
        cand = rng.uniform(0.0, region_side, size=2)
        if n_placed == 0 or np.all(
            np.linalg.norm(placed[:n_placed] - cand, axis=1) >= min_spacing
        ):
            placed[n_placed] = cand
            n_placed += 1
            if n_placed == count:
                return placed
    return _jittered_grid(rng, count, region_side, min_spacing)


# block name -> (array tag, axis): axis 0 moves x coordinates, 1 moves y
_BLOCK_MAP = {"x_t": ("t", 0), "y_t": ("t", 1), "x_r": ("r", 0), "y_r": ("r", 1)}


def build_block_subproblem(state: SensingOptState, block: str):
    """Convex restriction for one coordinate block at the current iterate.

    Decision vector w = [z, eta] where z is the moving coordinate vector. The
    two eta constraints keep their exact rotated-cone form except that the
    moving block's own variance is replaced by its supporting line u(z) =
    2 z_k^T P z - z_k^T P z_k <= z^T P z (tight at z_k). Pairwise distances of
    the moving array are linearized along the current offsets.
    """
    array_tag, axis = _BLOCK_MAP[block]
    if array_tag == "t":
        z_k, other_axis_own = (state.x_t, state.y_t) if axis == 0 else (state.y_t, state.x_t)
        same_axis_other = state.x_r if axis == 0 else state.y_r
        other_axis_other = state.y_r if axis == 0 else state.x_r
    else:
        z_k, other_axis_own = (state.x_r, state.y_r) if axis == 0 else (state.y_r, state.x_r)
        same_axis_other = state.x_t if axis == 0 else state.y_t
        other_axis_other = state.y_t if axis == 0 else state.x_t

    n = z_k.size
    p_own = centering_matrix(n)
    # covariance of the moving array is affine in z; the other array's is fixed
    cov_coeff = p_own @ other_axis_own
    cov_const = coord_covariance(same_axis_other, other_axis_other)
    v_same_other = coord_variance(same_axis_other)
    v_other_total = coord_variance(other_axis_own) + coord_variance(other_axis_other)

    taylor_coeff = 2.0 * (p_own @ z_k)
    taylor_const = -float(z_k @ p_own @ z_k) + v_same_other

    dim = n + 1
    g = np.concatenate([cov_coeff, [0.0]])
    h_own = np.concatenate([taylor_coeff, [0.0]])
    h_own_eta = np.concatenate([taylor_coeff, [-1.0]])
    h_eta_only = np.zeros(dim)
    h_eta_only[-1] = -1.0

    quads = []
    lin_rows = []
    lin_consts = []
    if v_other_total > 1e-30:
        # (own-axis total - eta) * other-axis total >= cov^2
        quads.append(
            QuadRow(g=g, d=cov_const, h1=h_own_eta, e1=taylor_const,
                    h2=np.zeros(dim), e2=v_other_total)
        )
        # (other-axis total - eta) * own-axis total >= cov^2
        quads.append(
            QuadRow(g=g, d=cov_const, h1=h_own, e1=taylor_const,
                    h2=h_eta_only, e2=v_other_total)
        )
    else:
        # the other axis carries no spread: covariance is identically zero and
        # the bounds reduce to eta <= own-axis total and eta <= 0
        lin_rows.append(np.concatenate([taylor_coeff, [-1.0]]))
        lin_consts.append(-taylor_const)
        lin_rows.append(-h_eta_only)
        lin_consts.append(0.0)

    # linearized spacing floor for pairs of the moving array
    pos = np.column_stack([state.x_t, state.y_t]) if array_tag == "t" else np.column_stack(
        [state.x_r, state.y_r]
    )
    d_min = state.min_spacing
    for i in range(n):
        for j in range(i + 1, n):
            delta = pos[i] - pos[j]
            norm = float(np.hypot(delta[0], delta[1]))
            if norm < 1e-12:
                raise DegenerateLinearizationError(
                    f"antennas {i} and {j} coincide; distance row cannot be linearized"
                )
            row = np.zeros(dim)
            row[i] = delta[axis] / norm
            row[j] = -delta[axis] / norm
            fixed = delta[1 - axis] ** 2 / norm
            lin_rows.append(row)
            lin_consts.append(d_min - fixed)

    box_lo = np.concatenate([np.zeros(n), [0.0]])
    box_hi = np.concatenate([np.full(n, state.region_side), [state.region_side**2]])
    objective = np.zeros(dim)
    objective[-1] = 1.0
    problem = ConvexSubproblem(
        objective, box_lo, box_hi, np.array(lin_rows), np.array(lin_consts), tuple(quads)
    )
    warm = np.concatenate([z_k, [max(0.0, min(eta_bounds(state.x_t, state.y_t, state.x_r, state.y_r)))]])
    return problem, warm


def sca_block_loop(state: SensingOptState, block: str, cfg: AoConfig) -> float:
    """Repeated convex restriction on one block; returns the eta after the loop.

    Every accepted step satisfies the true constraints at least as well as the
    solver reports (the restriction under-estimates both eta forms), so the
    true eta never decreases here.
    """
    eta_now = min(eta_bounds(state.x_t, state.y_t, state.x_r, state.y_r))
    for _ in range(cfg.max_inner):
        problem, warm = build_block_subproblem(state, block)
        report = solve_convex(problem, warm, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
        if report.status == "infeasible":
            break
        z_new = np.clip(report.solution[:-1], 0.0, state.region_side)
        old = state.coords(block)
        state.set_coords(block, z_new)
        eta_new = min(eta_bounds(state.x_t, state.y_t, state.x_r, state.y_r))
        if eta_new < eta_now:
            state.set_coords(block, old)  # numerical stall; keep the incumbent
            break
        gained = eta_new - eta_now
        eta_now = eta_new
        if gained <= cfg.delta_inner * max(eta_now, 1e-15):
            break
    state.eta_bar = eta_now
    return eta_now


def _single_run(num_transmit, num_receive, region_side, min_spacing, cfg, init_seed):
    rng = np.random.default_rng(init_seed)
    tx = random_feasible_positions(rng, num_transmit, region_side, min_spacing)
    rx = random_feasible_positions(rng, num_receive, region_side, min_spacing)
    state = SensingOptState(
        x_t=tx[:, 0].copy(), y_t=tx[:, 1].copy(),
        x_r=rx[:, 0].copy(), y_r=rx[:, 1].copy(),
        region_side=region_side, min_spacing=min_spacing,
    )
    state.eta_bar = min(eta_bounds(state.x_t, state.y_t, state.x_r, state.y_r))
    trace = [state.eta_bar]
    start = time.perf_counter()
    converged = False
    for outer in range(1, cfg.max_outer + 1):
        for block in BLOCKS:
            eta = sca_block_loop(state, block, cfg)
            state.history.append((outer, block, eta, (time.perf_counter() - start) * 1e3))
        trace.append(state.eta_bar)
        if trace[-1] - trace[-2] <= cfg.delta_outer * max(trace[-2], 1e-15):
            converged = True
            break
    return state, tuple(trace), converged


def optimize_sensing_layout(
    num_transmit: int,
    num_receive: int,
    constants: SceneConstants,
    region_side: float,
    min_spacing: float,
    cfg: AoConfig = AoConfig(),
) -> SensingResult:
    """Multi-restart alternating placement optimization for the sensing stage."""
    best = None
    traces = []
    for restart in range(cfg.num_inits):
        state, trace, converged = _single_run(
            num_transmit, num_receive, region_side, min_spacing, cfg, [cfg.seed, restart]
        )
        traces.append(trace)
        if best is None or state.eta_bar > best[0].eta_bar:
            best = (state, converged, restart)
    state, converged, restart = best
    eta1, eta2 = eta_bounds(state.x_t, state.y_t, state.x_r, state.y_r)
    g = _crb_prefactor(state.tx_layout(), state.rx_layout(), constants)
    crb = CrbPair(g / eta1, g / eta2)
    return SensingResult(
        tx=state.tx_layout(),
        rx=state.rx_layout(),
        eta_bar=state.eta_bar,
        crb=crb,
        threshold_met=max(crb.crb_alpha, crb.crb_beta) <= constants.crb_threshold,
        converged=converged,
        outer_traces=tuple(traces),
        history=tuple(state.history),
        best_restart=restart,
    )
