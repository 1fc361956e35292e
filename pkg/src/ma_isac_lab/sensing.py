"""Eavesdropper wavevector estimation and its accuracy limits.

The base station probes with orthogonal DFT snapshots, receives the rank-one
echo through the round-trip channel, and estimates the spatial wavevector
(alpha, beta) by maximum likelihood. Estimation accuracy is characterized by
the Cramer-Rao bound, available both in closed form (mean-removed coordinate
second moments of the two arrays) and through the full 4x4 Fisher information
over (alpha, beta, Re zeta, Im zeta).

Noise is circular complex Gaussian; a noise power sigma^2 is the total variance
per complex entry (real and imaginary parts carry sigma^2/2 each).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousEstimateError, ConfigError, SingularGeometryError
from .geometry import ArrayLayout, PathGain, SceneConstants, Wavevector, field_response, path_gain

__all__ = [
    "ProbeMatrix",
    "EchoObservation",
    "CrbPair",
    "FisherInfo",
    "UncertaintyRegion",
    "centering_matrix",
    "coord_variance",
    "coord_covariance",
    "probe_dft",
    "synthesize_echo",
    "mle_estimate",
    "crb_closed_form",
    "fim_numeric",
    "crb_from_fim",
    "uncertainty_region",
]


def centering_matrix(n: int) -> np.ndarray:
    """P = I/n - 11^T/n^2, so x^T P x is the mean-removed second moment / n."""
    return np.eye(n) / n - np.ones((n, n)) / n**2


def coord_variance(coords: np.ndarray) -> float:
    c = np.asarray(coords, dtype=float)
    return float(np.mean((c - c.mean()) ** 2))


def coord_covariance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigError(f"coordinate vectors differ in length: {a.shape} vs {b.shape}")
    return float(np.mean((a - a.mean()) * (b - b.mean())))


@dataclass(frozen=True)
class ProbeMatrix:
    """Sensing-stage transmit snapshots, shape (N, T)."""

    samples: np.ndarray
    power: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))


@dataclass(frozen=True)
class EchoObservation:
    """Received sensing snapshots, shape (M, T), plus the noise power used."""

    samples: np.ndarray
    noise_power: float


def probe_dft(num_transmit: int, snapshots: int, power: float) -> ProbeMatrix:
    """Orthogonal DFT probe: (1/T) X X^H = (P_s/N) I requires T >= N."""
    if snapshots < num_transmit:
        raise ConfigError(
            f"snapshots ({snapshots}) must be >= transmit antennas ({num_transmit}) "
            "for an orthogonal probe"
        )
    if not power > 0.0:
        raise ConfigError(f"probe power must be positive, got {power}")
    n = np.arange(num_transmit)[:, None]
    t = np.arange(snapshots)[None, :]
    x = math.sqrt(power / num_transmit) * np.exp(2j * math.pi * n * t / snapshots)
    return ProbeMatrix(x, power)


def synthesize_echo(
    channel: np.ndarray, probe: ProbeMatrix, noise_power: float, seed: int
) -> EchoObservation:
    """Y = H X + Z with i.i.d. circular complex Gaussian noise, reproducible by seed."""
    if noise_power < 0.0:
        raise ConfigError(f"noise power must be >= 0, got {noise_power}")
    clean = channel @ probe.samples
    rng = np.random.default_rng(seed)
    scale = math.sqrt(noise_power / 2.0)
    noise = scale * (rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape))
    return EchoObservation(clean + noise, noise_power)


def _grid_axis(step: float) -> np.ndarray:
    count = int(round(2.0 / step)) + 1
    return np.linspace(-1.0, 1.0, count)


def matched_filter_surface(
    w: np.ndarray,
    tx: ArrayLayout,
    rx: ArrayLayout,
    wavelength: float,
    alphas: np.ndarray,
    betas: np.ndarray,
) -> np.ndarray:
    """|g(a,b)^H W f(a,b)|^2 over the alpha x beta grid, W = X Y^H.

    The field response separates into per-axis phase factors, so the grid is
    swept one alpha column at a time with batched beta products.
    """
    jk = 2j * math.pi / wavelength
    ga = np.exp(jk * np.outer(tx.x, alphas))
    gb = np.exp(jk * np.outer(tx.y, betas))
    fa = np.exp(jk * np.outer(rx.x, alphas))
    fb = np.exp(jk * np.outer(rx.y, betas))
    out = np.empty((alphas.size, betas.size))
    for ia in range(alphas.size):
        inner = (ga[:, ia].conj()[:, None] * w) * fa[:, ia][None, :]  # N x M
        partial = gb.conj().T @ inner  # B x M
        out[ia, :] = np.abs(np.einsum("bm,mb->b", partial, fb)) ** 2
    return out


def mle_estimate(
    observation: EchoObservation,
    probe: ProbeMatrix,
    tx: ArrayLayout,
    rx: ArrayLayout,
    wavelength: float,
    grid_step: float = 0.005,
    refine_levels: int = 2,
    return_trace: bool = False,
):
    """Maximum-likelihood wavevector estimate by global grid search plus refinement.

    The coarse pass scans [-1, 1]^2 at grid_step; each refinement level shrinks
    the step tenfold on a 21-point window centered at the incumbent (which stays
    in the grid, so the incumbent objective never decreases). Ties resolve to
    the first maximum in alpha-major scan order.
    """
    w = probe.samples @ observation.samples.conj().T  # N x M
    alphas = _grid_axis(grid_step)
    betas = _grid_axis(grid_step)
    vals = matched_filter_surface(w, tx, rx, wavelength, alphas, betas)
    spread = vals.max() - vals.min()
    if spread <= 1e-12 * max(1.0, vals.max()):
        raise AmbiguousEstimateError(
            "matched-filter surface is flat; wavevector is unidentifiable"
        )
    ia, ib = np.unravel_index(int(np.argmax(vals)), vals.shape)
    best_a, best_b = alphas[ia], betas[ib]
    best_val = vals[ia, ib]
    trace = [best_val]
    step = grid_step
    for _ in range(refine_levels):
        step /= 10.0
        a_axis = np.clip(best_a + step * np.arange(-10, 11), -1.0, 1.0)
        b_axis = np.clip(best_b + step * np.arange(-10, 11), -1.0, 1.0)
        vals = matched_filter_surface(w, tx, rx, wavelength, a_axis, b_axis)
        ia, ib = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[ia, ib] >= best_val:
            best_a, best_b = a_axis[ia], b_axis[ib]
            best_val = vals[ia, ib]
        trace.append(best_val)
    estimate = Wavevector(float(best_a), float(best_b))
    if return_trace:
        return estimate, trace
    return estimate


@dataclass(frozen=True)
class CrbPair:
    """Cramer-Rao bounds for the two wavevector axes."""

    crb_alpha: float
    crb_beta: float


def _crb_prefactor(tx: ArrayLayout, rx: ArrayLayout, constants: SceneConstants) -> float:
    zeta = path_gain("sensing", constants)
    num = constants.wavelength**2 * constants.noise_sensing
    den = (
        8.0
        * rx.count
        * constants.sensing_power
        * constants.snapshots
        * math.pi**2
        * abs(zeta.value) ** 2
    )
    return num / den


def crb_closed_form(tx: ArrayLayout, rx: ArrayLayout, constants: SceneConstants) -> CrbPair:
    """CRB of (alpha, beta) from mean-removed coordinate moments of both arrays.

    Each axis profiles out the other through the covariance coupling term;
    a layout whose antennas are collinear along either axis carries no
    information about the orthogonal axis and is rejected as singular.
    """
    g = _crb_prefactor(tx, rx, constants)
    vx = coord_variance(tx.x) + coord_variance(rx.x)
    vy = coord_variance(tx.y) + coord_variance(rx.y)
    c = coord_covariance(tx.x, tx.y) + coord_covariance(rx.x, rx.y)
    scale = max(vx, vy)
    if vx <= 0.0 or vy <= 0.0:
        raise SingularGeometryError(
            f"zero coordinate spread (vx={vx:.3g}, vy={vy:.3g}); CRB is unbounded"
        )
    denom_a = vx - c * c / vy
    denom_b = vy - c * c / vx
    if denom_a <= 1e-14 * scale or denom_b <= 1e-14 * scale:
        raise SingularGeometryError(
            "fully correlated coordinate axes; profiled information vanishes"
        )
    return CrbPair(g / denom_a, g / denom_b)


@dataclass(frozen=True)
class FisherInfo:
    """4x4 Fisher information over (alpha, beta, Re zeta, Im zeta)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ConfigError(f"Fisher information must be 4x4, got {m.shape}")
        object.__setattr__(self, "matrix", m)


def fim_numeric(
    tx: ArrayLayout,
    rx: ArrayLayout,
    zeta: PathGain,
    probe: ProbeMatrix,
    noise_power: float,
    wv: Wavevector,
    wavelength: float,
) -> FisherInfo:
    """Fisher information assembled from exact derivatives of the noiseless echo.

    The mean of the vectorized observation is q = zeta * vec(f g^H X); entry
    (m, n) of f g^H has phase coefficient (x_r[m] - x_t[n]) against alpha and
    (y_r[m] - y_t[n]) against beta, which gives the two wavevector derivatives
    without any symbolic matrix calculus.
    """
    k = 2.0 * math.pi / wavelength
    g = field_response(tx, wv, wavelength)
    f = field_response(rx, wv, wavelength)
    frv = np.outer(f, g.conj())  # M x N
    x = probe.samples
    dx = rx.x[:, None] - tx.x[None, :]
    dy = rx.y[:, None] - tx.y[None, :]
    base = frv @ x  # M x T
    derivs = np.stack(
        [
            (zeta.value * ((1j * k * dx * frv) @ x)).ravel(),
            (zeta.value * ((1j * k * dy * frv) @ x)).ravel(),
            base.ravel(),
            (1j * base).ravel(),
        ],
        axis=1,
    )
    fim = (2.0 / noise_power) * np.real(derivs.conj().T @ derivs)
    return FisherInfo(fim)


def crb_from_fim(fim: FisherInfo) -> CrbPair:
    """Wavevector CRB: invert the Schur complement of the gain block."""
    j = fim.matrix
    j_rr = j[:2, :2]
    j_rz = j[:2, 2:]
    j_zz = j[2:, 2:]
    try:
        schur = j_rr - j_rz @ np.linalg.solve(j_zz, j_rz.T)
        cov = np.linalg.inv(schur)
    except np.linalg.LinAlgError as exc:
        raise SingularGeometryError(f"Fisher information is singular: {exc}") from exc
    if not np.all(np.isfinite(cov)) or cov[0, 0] <= 0.0 or cov[1, 1] <= 0.0:
        raise SingularGeometryError("Fisher information is numerically singular")
    return CrbPair(float(cov[0, 0]), float(cov[1, 1]))


@dataclass(frozen=True)
class UncertaintyRegion:
    """Axis-aligned wavevector box, clamped to the physical square [-1, 1]^2."""

    alpha_lo: float
    alpha_hi: float
    beta_lo: float
    beta_hi: float

    def __post_init__(self):
        ok = (
            -1.0 <= self.alpha_lo <= self.alpha_hi <= 1.0
            and -1.0 <= self.beta_lo <= self.beta_hi <= 1.0
        )
        if not ok:
            raise ConfigError(
                f"malformed uncertainty region "
                f"[{self.alpha_lo}, {self.alpha_hi}] x [{self.beta_lo}, {self.beta_hi}]"
            )

    @property
    def center(self) -> Wavevector:
        return Wavevector(
            0.5 * (self.alpha_lo + self.alpha_hi), 0.5 * (self.beta_lo + self.beta_hi)
        )


def uncertainty_region(
    estimate: Wavevector, crb: CrbPair, scale: float = 3.0
) -> UncertaintyRegion:
    """Estimate +/- scale * sqrt(CRB) per axis; scale 0 collapses to a point."""
    if scale < 0.0:
        raise ConfigError(f"region scale must be >= 0, got {scale}")
    if crb.crb_alpha < 0.0 or crb.crb_beta < 0.0:
        raise ConfigError("CRB values must be nonnegative")
    ha = scale * math.sqrt(crb.crb_alpha)
    hb = scale * math.sqrt(crb.crb_beta)
    return UncertaintyRegion(
        max(estimate.alpha - ha, -1.0),
        min(estimate.alpha + ha, 1.0),
        max(estimate.beta - hb, -1.0),
        min(estimate.beta + hb, 1.0),
    )
