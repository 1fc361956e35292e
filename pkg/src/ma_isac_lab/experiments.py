"""Seeded experiment orchestration and CSV persistence.

Eight experiment kinds cover the study's sweeps: convergence traces for both
optimization stages, estimation error versus sensing power, secrecy rate
versus transmit power across all benchmark schemes, sensitivity to a wrong
eavesdropper estimate, averaging over a random eavesdropper azimuth of
growing width, and scaling in antenna count and region size.

Every (sweep value, scheme) point derives its own seed from the root seed by
hashing the point identity, so reruns are reproducible record by record and
no two points share a random stream. Point failures are downgraded to a
`failure` record so one bad point cannot abort a long sweep. The wall_ms
column holds measured wall time: it is the one column excluded from the
byte-for-byte reproducibility of the emitted CSV.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .beamforming import robust_beamform, sample_uncertainty, secrecy_rate
from .benchmarks import legit_gain_positions, mrt_beamformer, mrt_zf_an_rates, upa_layout
from .comm_placement import CommOptConfig, optimize_comm_stage, select_worst_estimate
from .config import ExperimentConfig, convert_units, dbm_to_watts
from .errors import ConfigError
from .geometry import (
    ArrayLayout,
    Wavevector,
    comm_channel,
    echo_channel,
    path_gain,
    wavevector_from_angles,
)
from .parallel import map_tasks, resolve_threads
from .sensing import (
    UncertaintyRegion,
    crb_closed_form,
    mle_estimate,
    probe_dft,
    synthesize_echo,
)
from .sensing_placement import AoConfig, optimize_sensing_layout

__all__ = [
    "EXPERIMENT_KINDS",
    "SECRECY_SCHEMES",
    "RunRecord",
    "derive_seed",
    "angle_box_region",
    "run_experiment",
    "sort_records",
    "emit_csv",
    "read_csv",
]

log = logging.getLogger(__name__)

EXPERIMENT_KINDS = (
    "convergence-sensing",
    "convergence-comm",
    "mse-vs-power",
    "secrecy-vs-power",
    "robustness-sweep",
    "region-width",
    "ma-count",
    "region-size",
)

SECRECY_SCHEMES = (
    "Estimated-as-True",
    "FPA-H",
    "Ideal",
    "MRT",
    "MRT-ZF",
    "Proposed",
)

CSV_HEADER = ("experiment", "sweep", "scheme", "metric", "value", "seed", "wall_ms")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RunRecord:
    """One metric value at one (sweep value, scheme) point."""

    experiment: str
    sweep: object
    scheme: str
    metric: str
    value: float
    seed: int
    wall_ms: float


def _format_cell(value) -> str:
    # repr keeps floats byte-stable and round-trippable; ints stay bare
    if isinstance(value, float):
        return repr(value)
    return str(value)


def derive_seed(root_seed: int, experiment: str, sweep, scheme: str, index: int) -> int:
    """Per-trial seed: root XOR a hash of the point identity, folded to 64 bits."""
    tag = f"{experiment}|{_format_cell(sweep)}|{scheme}|{index}".encode("utf-8")
    digest = hashlib.sha256(tag).digest()
    return (int(root_seed) ^ int.from_bytes(digest[:8], "big")) & _MASK64


def angle_box_region(
    theta_deg: float, phi_deg: float, halfwidth_deg: float, grid: int = 41
) -> UncertaintyRegion:
    """Wavevector bounding box of an elevation/azimuth rectangle.

    The rectangle is the estimate plus/minus halfwidth_deg in both angles;
    extrema are taken on a dense grid because the wavevector map is not
    monotone in general.
    """
    if halfwidth_deg < 0.0:
        raise ConfigError(f"angle halfwidth must be >= 0, got {halfwidth_deg}")
    thetas = np.radians(np.linspace(theta_deg - halfwidth_deg, theta_deg + halfwidth_deg, grid))
    phis = np.radians(np.linspace(phi_deg - halfwidth_deg, phi_deg + halfwidth_deg, grid))
    alphas = np.sin(thetas)[:, None] * np.cos(phis)[None, :]
    betas = np.cos(thetas)
    return UncertaintyRegion(
        max(-1.0, float(alphas.min())),
        min(1.0, float(alphas.max())),
        max(-1.0, float(betas.min())),
        min(1.0, float(betas.max())),
    )


def _directions(config: ExperimentConfig) -> tuple[Wavevector, Wavevector]:
    legit = wavevector_from_angles(
        math.radians(config.legit_theta_deg), math.radians(config.legit_phi_deg)
    )
    truth = wavevector_from_angles(
        math.radians(config.eve_theta_deg), math.radians(config.eve_phi_deg)
    )
    return legit, truth


def _ao_cfg(config: ExperimentConfig, seed: int) -> AoConfig:
    return AoConfig(
        delta_outer=config.delta_sensing,
        delta_inner=config.delta_sensing_inner,
        max_outer=config.max_outer_sensing,
        num_inits=config.restarts,
        seed=seed,
    )


def _comm_cfg(
    config: ExperimentConfig, seed: int, region_scale: float | None = None
) -> CommOptConfig:
    return CommOptConfig(
        delta_block=config.delta_block,
        delta_outer=config.delta_comm,
        max_outer=config.max_outer_comm,
        line_points=config.line_points,
        num_trials=config.estimate_trials,
        hull_grid=config.hull_grid,
        eval_grid=config.eval_grid,
        region_scale=config.region_scale if region_scale is None else region_scale,
        seed=seed,
        beam_tol=config.delta_beam,
    )


def _achieved(layout, omega, constants, truth, legit) -> float:
    """Secrecy rate of a fixed design against the true eavesdropper channel."""
    zeta_c = path_gain("legit", constants).value
    zeta_e = path_gain("eve", constants).value
    h_c = comm_channel(layout, legit, zeta_c, constants.wavelength)
    h_e = comm_channel(layout, truth, zeta_e, constants.wavelength)
    return secrecy_rate(h_c, h_e, omega, constants.noise_comm, constants.noise_eve)


def _result_layout(result, template: ArrayLayout) -> ArrayLayout:
    return ArrayLayout(
        np.column_stack([result.x_t, result.y_t]),
        template.region_side,
        template.min_spacing,
    )


def _scheme_rate(scheme, config, constants, tx, rx, truth, legit, seed) -> float:
    """Achieved secrecy of one benchmark scheme on a common sensing layout."""
    lam = constants.wavelength
    if scheme == "Proposed":
        res = optimize_comm_stage(tx, rx, constants, truth, legit, _comm_cfg(config, seed))
        return _achieved(_result_layout(res, tx), res.beamformer.vector, constants, truth, legit)
    if scheme == "Ideal":
        res = optimize_comm_stage(
            tx, rx, constants, truth, legit,
            _comm_cfg(config, seed, region_scale=0.0), estimate_override=truth,
        )
        return _achieved(_result_layout(res, tx), res.beamformer.vector, constants, truth, legit)
    if scheme == "Estimated-as-True":
        res = optimize_comm_stage(
            tx, rx, constants, truth, legit, _comm_cfg(config, seed, region_scale=0.0)
        )
        return _achieved(_result_layout(res, tx), res.beamformer.vector, constants, truth, legit)
    if scheme == "FPA-H":
        spacing = lam / 2.0
        upa_tx = upa_layout(config.num_transmit, spacing, tx.region_side)
        upa_rx = upa_layout(config.num_receive, spacing, tx.region_side)
        cfg = _comm_cfg(config, seed)
        _, region, _ = select_worst_estimate(constants, upa_tx, upa_rx, truth, legit, cfg)
        zeta_c = path_gain("legit", constants).value
        zeta_e = path_gain("eve", constants).value
        h_c = comm_channel(upa_tx, legit, zeta_c, lam)
        samples = sample_uncertainty(region, upa_tx, zeta_e, lam, cfg.hull_grid)
        sol = robust_beamform(
            h_c, samples, constants.comm_power, constants.noise_comm,
            constants.noise_eve, cfg.beam_tol, cfg.beam_max_iter,
        )
        return _achieved(upa_tx, sol.vector, constants, truth, legit)
    if scheme == "MRT":
        layout, _ = legit_gain_positions(tx, legit, constants, _comm_cfg(config, seed))
        zeta_c = path_gain("legit", constants).value
        h_c = comm_channel(layout, legit, zeta_c, lam)
        return _achieved(layout, mrt_beamformer(h_c, constants.comm_power), constants, truth, legit)
    if scheme == "MRT-ZF":
        layout, _ = legit_gain_positions(tx, legit, constants, _comm_cfg(config, seed))
        zeta_c = path_gain("legit", constants).value
        zeta_e = path_gain("eve", constants).value
        h_c = comm_channel(layout, legit, zeta_c, lam)
        h_e = comm_channel(layout, truth, zeta_e, lam)
        return mrt_zf_an_rates(
            h_c, h_e, constants.comm_power, config.an_split,
            constants.noise_comm, constants.noise_eve, seed, config.an_draws,
        )
    raise ConfigError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class _PointSpec:
    fn: str
    experiment: str
    sweep: object
    scheme: str
    seed: int
    payload: tuple


def _trace_converged(trace, delta: float, max_outer: int) -> bool:
    # stopped before the iteration cap, or met the gain threshold right at it
    if len(trace) - 1 < max_outer:
        return True
    return trace[-1] - trace[-2] <= delta * max(trace[-2], 1e-15)


def _pt_convergence_sensing(spec: _PointSpec):
    (config,) = spec.payload
    constants = convert_units(config)
    result = optimize_sensing_layout(
        config.num_transmit, config.num_receive, constants,
        config.region_side, config.min_spacing, _ao_cfg(config, spec.seed),
    )
    rows = []
    for restart, trace in enumerate(result.outer_traces):
        scheme = f"restart-{restart}"
        for iteration, value in enumerate(trace):
            rows.append((iteration, scheme, "eta_bar", float(value)))
        converged = _trace_converged(trace, config.delta_sensing, config.max_outer_sensing)
        rows.append((len(trace) - 1, scheme, "converged", float(converged)))
    return rows


def _pt_convergence_comm(spec: _PointSpec):
    config, tx, rx = spec.payload
    constants = convert_units(config)
    legit, truth = _directions(config)
    result = optimize_comm_stage(tx, rx, constants, truth, legit, _comm_cfg(config, spec.seed))
    rows = [
        (iteration + 1, spec.scheme, "worst_rate", float(value))
        for iteration, value in enumerate(result.rate_trace)
    ]
    rows.append((len(result.rate_trace), spec.scheme, "converged", float(result.converged)))
    return rows


def _pt_mse(spec: _PointSpec):
    config, power_dbm, tx, rx = spec.payload
    constants = replace(convert_units(config), sensing_power=dbm_to_watts(power_dbm))
    _, truth = _directions(config)
    if spec.scheme == "FPA-H":
        spacing = constants.wavelength / 2.0
        tx = upa_layout(config.num_transmit, spacing, config.region_side)
        rx = upa_layout(config.num_receive, spacing, config.region_side)
    crb = crb_closed_form(tx, rx, constants)
    probe = probe_dft(tx.count, constants.snapshots, constants.sensing_power)
    zeta_s = path_gain("sensing", constants)
    channel = echo_channel(tx, rx, truth, zeta_s, constants.wavelength)
    sq_alpha = 0.0
    sq_beta = 0.0
    for trial in range(config.mse_trials):
        seed = derive_seed(config.seed, spec.experiment, power_dbm, spec.scheme, trial)
        obs = synthesize_echo(channel, probe, constants.noise_sensing, seed)
        estimate = mle_estimate(obs, probe, tx, rx, constants.wavelength, config.mle_grid_step)
        sq_alpha += (estimate.alpha - truth.alpha) ** 2
        sq_beta += (estimate.beta - truth.beta) ** 2
    return [
        (power_dbm, spec.scheme, "mse_alpha", sq_alpha / config.mse_trials),
        (power_dbm, spec.scheme, "mse_beta", sq_beta / config.mse_trials),
        (power_dbm, spec.scheme, "crb_alpha", float(crb.crb_alpha)),
        (power_dbm, spec.scheme, "crb_beta", float(crb.crb_beta)),
    ]


def _pt_secrecy(spec: _PointSpec):
    config, power_dbm, tx, rx = spec.payload
    constants = replace(convert_units(config), comm_power=dbm_to_watts(power_dbm))
    legit, truth = _directions(config)
    rate = _scheme_rate(spec.scheme, config, constants, tx, rx, truth, legit, spec.seed)
    return [(power_dbm, spec.scheme, "achieved_rate", float(rate))]


def _pt_robustness(spec: _PointSpec):
    config, theta_deg, tx, rx = spec.payload
    constants = convert_units(config)
    legit, truth = _directions(config)
    estimate = wavevector_from_angles(
        math.radians(theta_deg), math.radians(config.eve_phi_deg)
    )
    if spec.scheme == "Proposed":
        region = angle_box_region(theta_deg, config.eve_phi_deg, config.robust_halfwidth_deg)
        result = optimize_comm_stage(
            tx, rx, constants, truth, legit, _comm_cfg(config, spec.seed),
            estimate_override=estimate, region_override=region,
        )
    else:
        result = optimize_comm_stage(
            tx, rx, constants, truth, legit,
            _comm_cfg(config, spec.seed, region_scale=0.0), estimate_override=estimate,
        )
    rate = _achieved(
        _result_layout(result, tx), result.beamformer.vector, constants, truth, legit
    )
    return [(theta_deg, spec.scheme, "achieved_rate", float(rate))]


def _pt_region_width(spec: _PointSpec):
    config, width_deg, tx, rx, draws = spec.payload
    constants = convert_units(config)
    legit, _ = _directions(config)
    total = 0.0
    for trial, offset in enumerate(draws):
        phi = config.legit_phi_deg + offset * width_deg
        truth = wavevector_from_angles(
            math.radians(config.eve_theta_deg), math.radians(phi)
        )
        seed = derive_seed(config.seed, spec.experiment, width_deg, spec.scheme, trial)
        total += _scheme_rate(spec.scheme, config, constants, tx, rx, truth, legit, seed)
    return [(width_deg, spec.scheme, "avg_rate", total / len(draws))]


def _pt_ma_count(spec: _PointSpec):
    config, count = spec.payload
    local = replace(config, num_transmit=count, num_receive=count)
    constants = convert_units(local)
    legit, truth = _directions(local)
    sensing = optimize_sensing_layout(
        count, count, constants, local.region_side, local.min_spacing,
        _ao_cfg(local, spec.seed),
    )
    comm_seed = derive_seed(local.seed, spec.experiment, count, spec.scheme, 1)
    result = optimize_comm_stage(
        sensing.tx, sensing.rx, constants, truth, legit, _comm_cfg(local, comm_seed)
    )
    achieved = _achieved(
        _result_layout(result, sensing.tx), result.beamformer.vector, constants, truth, legit
    )
    return [
        (count, spec.scheme, "eta_bar", float(sensing.eta_bar)),
        (count, spec.scheme, "crb_alpha", float(sensing.crb.crb_alpha)),
        (count, spec.scheme, "crb_beta", float(sensing.crb.crb_beta)),
        (count, spec.scheme, "worst_rate", float(result.worst_case_rate)),
        (count, spec.scheme, "achieved_rate", float(achieved)),
    ]


def _pt_region_size(spec: _PointSpec):
    config, side_wavelengths = spec.payload
    local = replace(config, region_side_wavelengths=side_wavelengths)
    constants = convert_units(local)
    sensing = optimize_sensing_layout(
        local.num_transmit, local.num_receive, constants,
        local.region_side, local.min_spacing, _ao_cfg(local, spec.seed),
    )
    return [
        (side_wavelengths, spec.scheme, "eta_bar", float(sensing.eta_bar)),
        (side_wavelengths, spec.scheme, "crb_alpha", float(sensing.crb.crb_alpha)),
        (side_wavelengths, spec.scheme, "crb_beta", float(sensing.crb.crb_beta)),
    ]


_POINT_FNS = {
    "convergence_sensing": _pt_convergence_sensing,
    "convergence_comm": _pt_convergence_comm,
    "mse": _pt_mse,
    "secrecy": _pt_secrecy,
    "robustness": _pt_robustness,
    "region_width": _pt_region_width,
    "ma_count": _pt_ma_count,
    "region_size": _pt_region_size,
}


def _point_task(spec: _PointSpec) -> list:
    start = time.perf_counter()
    try:
        rows = _POINT_FNS[spec.fn](spec)
    except Exception as exc:
        wall = (time.perf_counter() - start) * 1e3
        log.warning(
            "point (%s, %s, %s) failed: %s", spec.experiment, spec.sweep, spec.scheme, exc
        )
        return [
            RunRecord(spec.experiment, spec.sweep, spec.scheme, "failure", 1.0, spec.seed, wall)
        ]
    wall = (time.perf_counter() - start) * 1e3
    return [
        RunRecord(spec.experiment, sweep, scheme, metric, float(value), spec.seed, wall)
        for sweep, scheme, metric, value in rows
    ]


def _shared_sensing(kind: str, config: ExperimentConfig):
    """One placement solve reused by every point of a sweep.

    The placement objective is a pure geometry functional, so neither the
    transmit-power sweep nor the eavesdropper draw changes the optimizer's
    output; solving once per experiment is exact reuse, not an approximation.
    """
    constants = convert_units(config)
    seed = derive_seed(config.seed, kind, "layout", "shared", 0)
    result = optimize_sensing_layout(
        config.num_transmit, config.num_receive, constants,
        config.region_side, config.min_spacing, _ao_cfg(config, seed),
    )
    return result.tx, result.rx


def _build_specs(kind: str, config: ExperimentConfig) -> list:
    root = config.seed
    if kind == "convergence-sensing":
        seed = derive_seed(root, kind, "layout", "shared", 0)
        return [_PointSpec("convergence_sensing", kind, 0, "all", seed, (config,))]
    if kind == "convergence-comm":
        tx, rx = _shared_sensing(kind, config)
        seed = derive_seed(root, kind, 0, "Proposed", 0)
        return [_PointSpec("convergence_comm", kind, 0, "Proposed", seed, (config, tx, rx))]
    if kind == "mse-vs-power":
        tx, rx = _shared_sensing(kind, config)
        return [
            _PointSpec(
                "mse", kind, power, scheme,
                derive_seed(root, kind, power, scheme, 0), (config, power, tx, rx),
            )
            for power in config.sensing_power_sweep_dbm
            for scheme in ("FPA-H", "Proposed")
        ]
    if kind == "secrecy-vs-power":
        tx, rx = _shared_sensing(kind, config)
        return [
            _PointSpec(
                "secrecy", kind, power, scheme,
                derive_seed(root, kind, power, scheme, 0), (config, power, tx, rx),
            )
            for power in config.comm_power_sweep_dbm
            for scheme in SECRECY_SCHEMES
        ]
    if kind == "robustness-sweep":
        tx, rx = _shared_sensing(kind, config)
        return [
            _PointSpec(
                "robustness", kind, theta, scheme,
                derive_seed(root, kind, theta, scheme, 0), (config, theta, tx, rx),
            )
            for theta in config.estimate_theta_sweep_deg
            for scheme in ("Estimated-as-True", "Proposed")
        ]
    if kind == "region-width":
        tx, rx = _shared_sensing(kind, config)
        # common random numbers: one offset per trial index, derived from the
        # root seed alone, shared by every width and scheme so the sweep is
        # monotone trial by trial instead of only in distribution
        rng = np.random.default_rng(root)
        draws = tuple(float(u) for u in rng.uniform(-1.0, 1.0, config.sweep_trials))
        return [
            _PointSpec(
                "region_width", kind, width, scheme,
                derive_seed(root, kind, width, scheme, 0), (config, width, tx, rx, draws),
            )
            for width in config.azimuth_width_sweep_deg
            for scheme in SECRECY_SCHEMES
        ]
    if kind == "ma-count":
        return [
            _PointSpec(
                "ma_count", kind, int(count), "Proposed",
                derive_seed(root, kind, int(count), "Proposed", 0), (config, int(count)),
            )
            for count in config.ma_count_sweep
        ]
    if kind == "region-size":
        return [
            _PointSpec(
                "region_size", kind, side, "Proposed",
                derive_seed(root, kind, side, "Proposed", 0), (config, side),
            )
            for side in config.region_size_sweep_wavelengths
        ]
    raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")


def run_experiment(kind: str, config: ExperimentConfig) -> list:
    """All records for one experiment kind, sorted for emission."""
    specs = _build_specs(kind, config)
    threads = resolve_threads(config.threads)
    chunks = map_tasks(_point_task, specs, threads)
    records = [record for chunk in chunks for record in chunk]
    return sort_records(records)


def _sweep_key(sweep):
    if isinstance(sweep, (int, float)):
        return (0, float(sweep), "")
    return (1, 0.0, str(sweep))


def sort_records(records) -> list:
    return sorted(records, key=lambda r: (_sweep_key(r.sweep), r.scheme, r.metric))


def emit_csv(records, path: str) -> None:
    """Sorted records to a UTF-8 CSV with the fixed seven-column header."""
    if not records:
        raise ValueError("no records to emit")
    ordered = sort_records(records)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in ordered:
            writer.writerow(
                [
                    record.experiment,
                    _format_cell(record.sweep),
                    record.scheme,
                    record.metric,
                    _format_cell(float(record.value)),
                    str(record.seed),
                    _format_cell(float(record.wall_ms)),
                ]
            )


def _parse_sweep(cell: str):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path: str) -> list:
    """Records back from an emitted file (inverse of emit_csv)."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        return [
            RunRecord(
                experiment=row[0],
                sweep=_parse_sweep(row[1]),
                scheme=row[2],
                metric=row[3],
                value=float(row[4]),
                seed=int(row[5]),
                wall_ms=float(row[6]),
            )
            for row in reader
        ]
