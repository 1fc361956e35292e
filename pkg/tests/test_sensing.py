"""Estimation-layer tests: probe orthogonality, MLE, CRB vs. Fisher information.

The Fisher-information oracle here is derivative-free: central finite
differences of the noiseless echo mean against each parameter, assembled into
the same quadratic form. The closed-form CRB is then required to agree with
the Schur-complement route through the analytic FIM.
"""

import math

import numpy as np
import pytest

from ma_isac_lab.errors import AmbiguousEstimateError, ConfigError, SingularGeometryError
from ma_isac_lab.geometry import (
    ArrayLayout,
    PathGain,
    Wavevector,
    echo_channel,
    field_response,
    path_gain,
)
from ma_isac_lab.sensing import (
    CrbPair,
    FisherInfo,
    centering_matrix,
    coord_covariance,
    coord_variance,
    crb_closed_form,
    crb_from_fim,
    fim_numeric,
    matched_filter_surface,
    mle_estimate,
    probe_dft,
    synthesize_echo,
    uncertainty_region,
)

from test_geometry import default_constants, random_layout


def _echo_mean(tx, rx, zeta_value, probe, wv, wavelength):
    """Noiseless vectorized echo mean q(alpha, beta, Re zeta, Im zeta)."""
    g = field_response(tx, wv, wavelength)
    f = field_response(rx, wv, wavelength)
    return (zeta_value * np.outer(f, g.conj()) @ probe.samples).ravel()


def fd_fisher(tx, rx, zeta_value, probe, noise_power, wv, wavelength, step=1e-6):
    """Central-difference Fisher information, independent of analytic derivatives."""
    params = np.array([wv.alpha, wv.beta, zeta_value.real, zeta_value.imag])

    def mean(p):
        return _echo_mean(tx, rx, complex(p[2], p[3]), probe, Wavevector(p[0], p[1]), wavelength)

    cols = []
    for i in range(4):
        hi = params.copy()
        lo = params.copy()
        hi[i] += step
        lo[i] -= step
        cols.append((mean(hi) - mean(lo)) / (2.0 * step))
    d = np.stack(cols, axis=1)
    return (2.0 / noise_power) * np.real(d.conj().T @ d)


class TestMoments:
    def test_variance_examples(self):
        assert coord_variance([0.0, 1.0]) == pytest.approx(0.25, abs=1e-15)
        assert coord_variance([0.3, 0.3, 0.3]) == 0.0

    def test_symmetric_covariance_zero(self):
        assert coord_covariance([-1.0, 0.0, 1.0], [0.5, 0.5, 0.5]) == 0.0

    def test_quadratic_form_identity(self):
        rng = np.random.default_rng(31)
        for n in (2, 5, 16):
            p = centering_matrix(n)
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            assert x @ p @ x == pytest.approx(coord_variance(x), rel=1e-12)
            assert x @ p @ y == pytest.approx(coord_covariance(x, y), rel=1e-12, abs=1e-15)

    def test_cauchy_schwarz(self):
        rng = np.random.default_rng(37)
        for _ in range(50):
            x = rng.normal(size=8)
            y = rng.normal(size=8)
            assert coord_covariance(x, y) ** 2 <= coord_variance(x) * coord_variance(y) + 1e-15


class TestProbe:
    @pytest.mark.parametrize("n,t", [(4, 4), (16, 16), (8, 12), (3, 7)])
    def test_orthogonality(self, n, t):
        probe = probe_dft(n, t, 2.0)
        gram = probe.samples @ probe.samples.conj().T / t
        assert np.max(np.abs(gram - (2.0 / n) * np.eye(n))) < 1e-10

    def test_total_power(self):
        probe = probe_dft(16, 16, 1.0)
        col_power = np.sum(np.abs(probe.samples) ** 2, axis=0)
        assert np.max(np.abs(col_power - 1.0)) < 1e-12

    def test_too_few_snapshots(self):
        with pytest.raises(ConfigError):
            probe_dft(16, 8, 1.0)


class TestEchoSynthesis:
    def test_seed_determinism(self):
        rng = np.random.default_rng(41)
        tx = random_layout(rng, 4)
        rx = random_layout(rng, 4)
        c = default_constants(snapshots=4)
        h = echo_channel(tx, rx, Wavevector(0.1, -0.5), path_gain("sensing", c), c.wavelength)
        probe = probe_dft(4, 4, c.sensing_power)
        a = synthesize_echo(h, probe, c.noise_sensing, seed=123)
        b = synthesize_echo(h, probe, c.noise_sensing, seed=123)
        other = synthesize_echo(h, probe, c.noise_sensing, seed=124)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, other.samples)

    def test_zero_noise_exact(self):
        rng = np.random.default_rng(43)
        tx = random_layout(rng, 4)
        rx = random_layout(rng, 4)
        c = default_constants(snapshots=4)
        h = echo_channel(tx, rx, Wavevector(0.1, -0.5), path_gain("sensing", c), c.wavelength)
        probe = probe_dft(4, 4, c.sensing_power)
        obs = synthesize_echo(h, probe, 0.0, seed=1)
        assert np.max(np.abs(obs.samples - h @ probe.samples)) == 0.0

    def test_noise_variance(self):
        # MT = 10^4 entries keeps the sample-variance estimate inside 5%
        probe = probe_dft(100, 100, 1.0)
        h = np.zeros((100, 100), dtype=complex)
        obs = synthesize_echo(h, probe, 4e-3, seed=7)
        sample_var = np.mean(np.abs(obs.samples) ** 2)
        assert sample_var == pytest.approx(4e-3, rel=0.05)


class TestMle:
    def _setup(self, rng, n=8, m=8, t=8):
        tx = random_layout(rng, n)
        rx = random_layout(rng, m)
        c = default_constants(snapshots=t)
        probe = probe_dft(n, t, c.sensing_power)
        return tx, rx, c, probe

    def test_surface_matches_direct_loop(self):
        rng = np.random.default_rng(47)
        tx, rx, c, probe = self._setup(rng, n=5, m=4, t=6)
        truth = Wavevector(0.31, -0.52)
        h = echo_channel(tx, rx, truth, path_gain("sensing", c), c.wavelength)
        obs = synthesize_echo(h, probe, c.noise_sensing, seed=3)
        w = probe.samples @ obs.samples.conj().T
        alphas = np.linspace(-1.0, 1.0, 11)
        betas = np.linspace(-1.0, 1.0, 9)
        got = matched_filter_surface(w, tx, rx, c.wavelength, alphas, betas)
        for ia, a in enumerate(alphas):
            for ib, b in enumerate(betas):
                wv = Wavevector(a, b)
                g = field_response(tx, wv, c.wavelength)
                f = field_response(rx, wv, c.wavelength)
                expected = abs(np.conj(g) @ w @ f) ** 2
                assert got[ia, ib] == pytest.approx(expected, rel=1e-10)

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(53)
        tx, rx, c, probe = self._setup(rng, n=16, m=16, t=16)
        truth = Wavevector(-0.4331, -0.5007)  # off the coarse grid on both axes
        h = echo_channel(tx, rx, truth, path_gain("sensing", c), c.wavelength)
        obs = synthesize_echo(h, probe, 0.0, seed=0)
        est = mle_estimate(obs, probe, tx, rx, c.wavelength)
        final_step = 0.005 / 100.0
        assert abs(est.alpha - truth.alpha) <= final_step + 1e-12
        assert abs(est.beta - truth.beta) <= final_step + 1e-12

    def test_refinement_monotone(self):
        rng = np.random.default_rng(59)
        tx, rx, c, probe = self._setup(rng)
        truth = Wavevector(0.123, 0.456)
        h = echo_channel(tx, rx, truth, path_gain("sensing", c), c.wavelength)
        obs = synthesize_echo(h, probe, c.noise_sensing, seed=11)
        _, trace = mle_estimate(obs, probe, tx, rx, c.wavelength, return_trace=True)
        assert len(trace) == 3
        assert all(trace[i + 1] >= trace[i] for i in range(len(trace) - 1))

    def test_estimate_stays_in_square(self):
        rng = np.random.default_rng(61)
        tx, rx, c, probe = self._setup(rng, n=4, m=4, t=4)
        truth = Wavevector(0.99, -0.99)
        h = echo_channel(tx, rx, truth, path_gain("sensing", c), c.wavelength)
        obs = synthesize_echo(h, probe, 1e-10, seed=5)  # heavy noise
        est = mle_estimate(obs, probe, tx, rx, c.wavelength, grid_step=0.05)
        assert -1.0 <= est.alpha <= 1.0
        assert -1.0 <= est.beta <= 1.0

    def test_single_antenna_ambiguous(self):
        c = default_constants(snapshots=2)
        tx = ArrayLayout([[0.1, 0.1]], region_side=0.25)
        rx = ArrayLayout([[0.05, 0.2]], region_side=0.25)
        probe = probe_dft(1, 2, c.sensing_power)
        h = echo_channel(tx, rx, Wavevector(0.3, 0.3), path_gain("sensing", c), c.wavelength)
        obs = synthesize_echo(h, probe, c.noise_sensing, seed=2)
        with pytest.raises(AmbiguousEstimateError):
            mle_estimate(obs, probe, tx, rx, c.wavelength, grid_step=0.1)


class TestFisherInformation:
    def test_analytic_matches_finite_difference(self):
        rng = np.random.default_rng(67)
        c = default_constants(snapshots=8)
        zeta = path_gain("sensing", c)
        probe = probe_dft(6, 8, c.sensing_power)
        for _ in range(5):
            tx = random_layout(rng, 6)
            rx = random_layout(rng, 5)
            wv = Wavevector(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
            fim = fim_numeric(tx, rx, zeta, probe, c.noise_sensing, wv, c.wavelength)
            oracle = fd_fisher(tx, rx, zeta.value, probe, c.noise_sensing, wv, c.wavelength)
            scale = np.abs(oracle).max()
            assert np.max(np.abs(fim.matrix - oracle)) < 1e-6 * scale

    def test_gain_block_closed_form(self):
        # The (Re zeta, Im zeta) block is exactly (2 P_s T M / sigma^2) I.
        rng = np.random.default_rng(71)
        c = default_constants(snapshots=16)
        zeta = path_gain("sensing", c)
        probe = probe_dft(16, 16, c.sensing_power)
        tx = random_layout(rng, 16)
        rx = random_layout(rng, 12)
        fim = fim_numeric(tx, rx, zeta, probe, c.noise_sensing, Wavevector(0.2, 0.3), c.wavelength)
        expected = 2.0 * c.sensing_power * c.snapshots * 12 / c.noise_sensing
        assert np.allclose(fim.matrix[2:, 2:], expected * np.eye(2), rtol=1e-10)

    def test_closed_form_crb_matches_fim_route(self):
        rng = np.random.default_rng(73)
        c = default_constants(snapshots=16)
        zeta = path_gain("sensing", c)
        for trial in range(20):
            n = int(rng.integers(3, 17))
            m = int(rng.integers(3, 17))
            tx = random_layout(rng, n)
            rx = random_layout(rng, m)
            probe = probe_dft(n, max(n, 16), c.sensing_power)
            wv = Wavevector(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
            closed = crb_closed_form(tx, rx, c)
            fim = fim_numeric(tx, rx, zeta, probe, c.noise_sensing, wv, c.wavelength)
            numeric = crb_from_fim(fim)
            assert closed.crb_alpha == pytest.approx(numeric.crb_alpha, rel=1e-6)
            assert closed.crb_beta == pytest.approx(numeric.crb_beta, rel=1e-6)

    def test_crb_from_fim_diagonal(self):
        crb = crb_from_fim(FisherInfo(np.diag([4.0, 10.0, 3.0, 3.0])))
        assert crb.crb_alpha == pytest.approx(0.25, rel=1e-14)
        assert crb.crb_beta == pytest.approx(0.1, rel=1e-14)

    def test_crb_from_fim_singular(self):
        with pytest.raises(SingularGeometryError):
            crb_from_fim(FisherInfo(np.zeros((4, 4))))


class TestClosedFormCrb:
    def test_translation_invariance(self):
        rng = np.random.default_rng(79)
        c = default_constants()
        tx = random_layout(rng, 8)
        rx = random_layout(rng, 8)
        base = crb_closed_form(tx, rx, c)
        moved = crb_closed_form(tx.translated(0.31, -0.17), rx.translated(-0.05, 0.4), c)
        assert moved.crb_alpha == pytest.approx(base.crb_alpha, rel=1e-12)
        assert moved.crb_beta == pytest.approx(base.crb_beta, rel=1e-12)

    def test_power_scaling(self):
        rng = np.random.default_rng(83)
        tx = random_layout(rng, 8)
        rx = random_layout(rng, 8)
        base = crb_closed_form(tx, rx, default_constants(sensing_power=1.0))
        double = crb_closed_form(tx, rx, default_constants(sensing_power=2.0))
        assert double.crb_alpha == pytest.approx(base.crb_alpha / 2.0, rel=1e-14)
        assert double.crb_beta == pytest.approx(base.crb_beta / 2.0, rel=1e-14)

    def test_axis_swap_symmetry(self):
        rng = np.random.default_rng(89)
        c = default_constants()
        tx = random_layout(rng, 8)
        rx = random_layout(rng, 8)
        base = crb_closed_form(tx, rx, c)
        swapped = crb_closed_form(
            ArrayLayout(tx.positions[:, ::-1], tx.region_side),
            ArrayLayout(rx.positions[:, ::-1], rx.region_side),
            c,
        )
        assert swapped.crb_alpha == pytest.approx(base.crb_beta, rel=1e-12)
        assert swapped.crb_beta == pytest.approx(base.crb_alpha, rel=1e-12)

    def test_horizontal_line_singular(self):
        c = default_constants()
        xs = np.linspace(0.0, 0.25, 8)
        line = ArrayLayout(np.column_stack([xs, np.full(8, 0.1)]), 0.25)
        with pytest.raises(SingularGeometryError):
            crb_closed_form(line, line, c)

    def test_positive(self):
        rng = np.random.default_rng(97)
        c = default_constants()
        for _ in range(10):
            tx = random_layout(rng, 6)
            rx = random_layout(rng, 6)
            crb = crb_closed_form(tx, rx, c)
            assert crb.crb_alpha > 0.0
            assert crb.crb_beta > 0.0


class TestUncertaintyRegion:
    def test_scale_and_clamp(self):
        region = uncertainty_region(Wavevector(0.99, -0.5), CrbPair(1e-4, 4e-4), scale=3.0)
        assert region.alpha_hi == 1.0  # clamped
        assert region.alpha_lo == pytest.approx(0.99 - 0.03, abs=1e-12)
        assert region.beta_lo == pytest.approx(-0.5 - 0.06, abs=1e-12)
        assert region.beta_hi == pytest.approx(-0.5 + 0.06, abs=1e-12)

    def test_zero_scale_singleton(self):
        region = uncertainty_region(Wavevector(0.2, 0.3), CrbPair(1e-4, 1e-4), scale=0.0)
        assert region.alpha_lo == region.alpha_hi == 0.2
        assert region.beta_lo == region.beta_hi == 0.3

    def test_negative_scale_rejected(self):
        with pytest.raises(ConfigError):
            uncertainty_region(Wavevector(0.0, 0.0), CrbPair(1e-4, 1e-4), scale=-1.0)
