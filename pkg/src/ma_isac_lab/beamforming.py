"""Robust transmit beamforming against a sampled wavevector uncertainty set.

The eavesdropper's channel is only known to lie in a rectangle of wavevectors,
so the design treats every convex combination of finitely many sampled
channels as admissible. For a fixed mixture the optimal direction has the
whitened-matched-filter closed form, which equals the principal generalized
eigenvector of the rank-one legitimate outer product against the weighted
interference-plus-noise matrix; the worst mixture is then found by convex
minimization over the simplex, whose solution equalizes the beam's leakage
across the active samples (the saddle-point property of the max-min design).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import ConfigError
from .geometry import ArrayLayout, Wavevector, comm_channel
from .sensing import UncertaintyRegion

__all__ = [
    "HullSamples",
    "SimplexWeights",
    "BeamformerSolution",
    "sample_uncertainty",
    "weight_update",
    "direction_update",
    "generalized_max_eig",
    "robust_beamform",
    "secrecy_rate",
    "worst_case_secrecy",
]


@dataclass(frozen=True)
class HullSamples:
    """Sampled eavesdropper channels spanning the uncertainty rectangle."""

    wavevectors: np.ndarray  # (F, 2) sampled (alpha, beta) points
    channels: np.ndarray  # (F, N) complex channel vectors
    matrices: np.ndarray  # (F, N, N) rank-one outer products

    @property
    def count(self) -> int:
        return self.wavevectors.shape[0]


@dataclass(frozen=True)
class SimplexWeights:
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if np.any(mu < -1e-12) or abs(mu.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must be a probability vector")
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class BeamformerSolution:
    direction: np.ndarray  # unit-norm complex direction
    power: float
    vector: np.ndarray  # sqrt(power) * direction
    gamma: float
    weights: SimplexWeights
    iterations: int
    converged: bool


def _axis_points(lo: float, hi: float, n: int) -> np.ndarray:
    if hi > lo:
        return np.linspace(lo, hi, n)
    return np.array([lo])


def sample_uncertainty(
    region: UncertaintyRegion,
    tx: ArrayLayout,
    zeta_e: complex,
    wavelength: float,
    grid: int | tuple[int, int] = 5,
) -> HullSamples:
    """Uniform endpoint-inclusive grid of channels over the region.

    Degenerate axes collapse to a single point, so a singleton region always
    yields one sample regardless of the requested grid.
    """
    na, nb = (grid, grid) if isinstance(grid, int) else grid
    if na < 1 or nb < 1:
        raise ConfigError("grid counts must be positive")
    alphas = _axis_points(region.alpha_lo, region.alpha_hi, na)
    betas = _axis_points(region.beta_lo, region.beta_hi, nb)
    points = np.array([(a, b) for a in alphas for b in betas])
    channels = np.array(
        [comm_channel(tx, Wavevector(a, b), zeta_e, wavelength) for a, b in points]
    )
    matrices = channels[:, :, None] * channels[:, None, :].conj()
    return HullSamples(points, channels, matrices)


def weight_update(direction: np.ndarray, samples: HullSamples) -> SimplexWeights:
    """Worst-case mixture for a fixed beam: weights proportional to leakage."""
    leak = np.abs(samples.channels.conj() @ direction) ** 2
    total = leak.sum()
    if total <= 0.0:
        return SimplexWeights(np.full(samples.count, 1.0 / samples.count))
    return SimplexWeights(leak / total)


def direction_update(
    power: float,
    weights: SimplexWeights,
    samples: HullSamples,
    h_c: np.ndarray,
    noise_comm: float,
    noise_eve: float,
):
    """Optimal unit direction against a fixed mixture, with its objective.

    The direction is (P * sum_f mu_f H_f + noise_eve * I)^{-1} h_c normalized,
    and gamma is the quadratic form of h_c in that inverse. The legitimate
    noise floor shifts the achieved ratio but not the maximizing direction.
    """
    if noise_eve <= 0.0:
        raise ConfigError("eavesdropper noise power must be positive")
    n = h_c.size
    b = power * np.einsum("f,fij->ij", weights.mu, samples.matrices)
    b += noise_eve * np.eye(n)
    sol = np.linalg.solve(b, h_c)
    gamma = float(np.real(h_c.conj() @ sol))
    direction = _normalize_phase(sol / np.linalg.norm(sol))
    return direction, gamma


def generalized_max_eig(a_mat: np.ndarray, b_mat: np.ndarray):
    """Principal eigenpair of the Hermitian pencil (A, B), B positive definite."""
    try:
        vals, vecs = scipy.linalg.eigh(a_mat, b_mat)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConfigError(f"pencil is not positive definite: {exc}") from exc
    vec = vecs[:, -1]
    return float(vals[-1]), _normalize_phase(vec / np.linalg.norm(vec))


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    pivot = v[k]
    if abs(pivot) == 0.0:
        return v
    return v * (abs(pivot) / pivot)


def _gamma_on_segment(b_mat, delta, h_c, s):
    sol = np.linalg.solve(b_mat + s * delta, h_c)
    return float(np.real(h_c.conj() @ sol))


def robust_beamform(
    h_c: np.ndarray,
    samples: HullSamples,
    power: float,
    noise_comm: float,
    noise_eve: float,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> BeamformerSolution:
    """Saddle-point beamformer by conditional-gradient descent on the mixture.

    gamma(mu) = h_c^H B_mu^{-1} h_c is convex in the simplex weights, and its
    partial derivatives are the (negated, scaled) per-sample leakages of the
    current optimal direction. Each iteration therefore shifts mixture mass
    from the weakest active sample to the one the beam leaks into most, with
    an exact line search along the segment, and stops once the duality gap
    certifies gamma within tol relative of the inner minimum. Full transmit
    power is always used because the objective improves monotonically with it.
    """
    if power < 0.0:
        raise ConfigError(f"transmit power must be nonnegative, got {power}")
    f_count = samples.count
    mu = np.full(f_count, 1.0 / f_count)
    converged = False
    iterations = 0
    direction, gamma = None, None
    for iterations in range(1, max_iter + 1):
        b = power * np.einsum("f,fij->ij", mu, samples.matrices)
        b += noise_eve * np.eye(h_c.size)
        u = np.linalg.solve(b, h_c)
        gamma = float(np.real(h_c.conj() @ u))
        direction = _normalize_phase(u / np.linalg.norm(u))
        leak = power * np.abs(samples.channels.conj() @ u) ** 2  # -grad of gamma
        gap = float(leak.max() - mu @ leak)
        if gap <= tol * max(gamma, 1e-300):
            converged = True
            break
        # pairwise step: shift mass from the weakest active sample to the worst
        active = np.flatnonzero(mu > 1e-15)
        away = active[int(np.argmin(leak[active]))]
        toward = int(np.argmax(leak))
        step_dir = np.zeros(f_count)
        step_dir[toward] += 1.0
        step_dir[away] -= 1.0
        s_max = float(mu[away])
        delta = power * (samples.matrices[toward] - samples.matrices[away])
        res = scipy.optimize.minimize_scalar(
            lambda s: _gamma_on_segment(b, delta, h_c, s),
            bounds=(0.0, s_max), method="bounded",
            options={"xatol": 1e-14},
        )
        s = float(res.x)
        if _gamma_on_segment(b, delta, h_c, s_max) <= res.fun:
            s = s_max
        mu = np.clip(mu + s * step_dir, 0.0, None)
        mu /= mu.sum()
    return BeamformerSolution(
        direction=direction,
        power=power,
        vector=np.sqrt(power) * direction,
        gamma=gamma,
        weights=SimplexWeights(mu),
        iterations=iterations,
        converged=converged,
    )


def secrecy_rate(h_c, h_e, omega, noise_comm: float, noise_eve: float) -> float:
    """[log2(1 + legit SNR) - log2(1 + eavesdropper SNR)]+ in bits/s/Hz."""
    snr_c = np.abs(h_c.conj() @ omega) ** 2 / noise_comm
    snr_e = np.abs(h_e.conj() @ omega) ** 2 / noise_eve
    return max(0.0, float(np.log2(1.0 + snr_c) - np.log2(1.0 + snr_e)))


def worst_case_secrecy(
    h_c: np.ndarray,
    tx: ArrayLayout,
    zeta_e: complex,
    region: UncertaintyRegion,
    omega: np.ndarray,
    noise_comm: float,
    noise_eve: float,
    wavelength: float,
    eval_grid: int = 21,
) -> float:
    """Minimum secrecy rate over a dense wavevector grid in the region."""
    samples = sample_uncertainty(region, tx, zeta_e, wavelength, eval_grid)
    snr_c = float(np.abs(h_c.conj() @ omega) ** 2 / noise_comm)
    snr_e = np.abs(samples.channels.conj() @ omega) ** 2 / noise_eve
    worst = np.log2(1.0 + snr_c) - np.log2(1.0 + snr_e.max())
    return max(0.0, float(worst))
