"""Scenario dispatch: build a run from a RunConfig and report its results.

Every run produces one or more CSV time series (header line documents the
columns) and a JSON-able summary carrying initial/final energy, the
measured drift of every invariant the scenario tracks, and wall time.
Identical config + seed give byte-identical CSVs; the summary is
deterministic except for the wall-time field.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bohmion_qhd, nonadiabatic
from .config import RunConfig, _REQUIRED
from .ensembles import BohmionEnsemble
from .errors import ConfigurationError
from .nonadiabatic import (
    EFBohmionState,
    ElectronicModel,
    MeanFieldState,
    meanfield_evolve,
)
from .qhd_reference import (
    WavefunctionGrid,
    collective_energy,
    dirac_energy,
    madelung_fields,
    madelung_history,
    split_step_propagate,
    trace_bohmian,
)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(columns: list[str], rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    status: str                   # ok | invariant_failure | numerical_failure
    scenario: str
    summary: dict
    series: dict[str, str] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)


def _gate_invariants(drifts: dict, tolerances: dict):
    failures = []
    for name, tol in tolerances.items():
        if name not in drifts:
            raise ConfigurationError(
                f"[tolerances] {name} does not name a tracked invariant; "
                f"tracked: {sorted(drifts)}"
            )
        if drifts[name] > tol:
            failures.append(name)
    return failures


def _electronic_model(cfg: RunConfig) -> ElectronicModel:
    sec = cfg.sections["electronic"]
    name = sec.get_str("model", "linear_vibronic") if sec.present else "linear_vibronic"
    if name == "linear_vibronic":
        return ElectronicModel.linear_vibronic(
            kappa=sec.get_float("kappa", 1.0) if sec.present else 1.0,
            delta=sec.get_float("delta", 1.0) if sec.present else 1.0,
        )
    if name == "constant":
        return ElectronicModel.constant(sec.get_matrix("matrix"))
    if name == "polynomial":
        mats = []
        order = 0
        while f"matrix_{order}" in sec.keys():
            mats.append(sec.get_matrix(f"matrix_{order}"))
            order += 1
        if not mats:
            raise ConfigurationError(
                "[electronic] polynomial model needs matrix_0, matrix_1, ..."
            )
        return ElectronicModel.polynomial(mats)
    raise ConfigurationError(f"[electronic] unknown model {name!r}")


def _run_bohmions(cfg: RunConfig) -> RunResult:
    sec = cfg.sections["bohmions"]
    mode = sec.get_str("mode", "hamiltonian")
    if mode not in bohmion_qhd.MODES:
        raise ConfigurationError(
            f"[bohmions] mode = {mode!r}; expected one of {bohmion_qhd.MODES}"
        )
    q = sec.get_floats("q", _REQUIRED)
    p = sec.get_floats("p", _REQUIRED)
    w = sec.get_floats("w", np.full(q.size, 1.0 / q.size))
    ens = BohmionEnsemble.from_raw_weights(q, p, w)

    start = time.perf_counter()
    if mode == bohmion_qhd.HAMILTONIAN:
        traj = bohmion_qhd.evolve_rqhd(
            ens, cfg.potential, cfg.kernel, cfg.dt, cfg.steps, cfg.constants,
            stride=cfg.stride,
        )
    elif mode == bohmion_qhd.LAGRANGIAN:
        traj = bohmion_qhd.evolve_lagrangian(
            ens, cfg.potential, cfg.kernel, cfg.dt, cfg.steps, cfg.constants,
            stride=cfg.stride,
        )
    else:
        traj = bohmion_qhd.classical_closure_evolve(
            ens, cfg.potential, cfg.dt, cfg.steps, cfg.constants, stride=cfg.stride
        )
    wall = time.perf_counter() - start

    n = ens.n
    columns = (
        ["t"]
        + [f"q_{a}" for a in range(n)]
        + [f"p_{a}" for a in range(n)]
        + ["energy", "total_momentum"]
    )
    rows = [
        [traj.times[i], *traj.q[i], *traj.p[i], traj.energy[i], traj.momentum[i]]
        for i in range(traj.times.size)
    ]
    drifts = {
        "energy_drift": traj.energy_drift(),
        "momentum_drift": traj.momentum_drift(),
    }
    failures = _gate_invariants(drifts, cfg.tolerances)
    summary = {
        "scenario": "bohmions",
        "mode": mode,
        "n_particles": n,
        "initial_energy": float(traj.energy[0]),
        "final_energy": float(traj.energy[-1]),
        "invariant_drifts": drifts,
        "wall_time_s": wall,
    }
    return RunResult(
        status="invariant_failure" if failures else "ok",
        scenario="bohmions",
        summary=summary,
        series={"trajectory": render_csv(columns, rows)},
        failures=failures,
    )


def _make_packet(sec, cfg: RunConfig) -> WavefunctionGrid:
    n = sec.get_int("n", 512)
    length = sec.get_float("length", 40.0)
    packet = sec.get_str("packet", "gaussian")
    center = sec.get_float("center", 0.0)
    if packet == "gaussian":
        sigma = sec.get_float("sigma", 1.0)
        k0 = sec.get_float("k0", 0.0)

        def psi_fn(x):
            return np.exp(-((x - center) ** 2) / (4.0 * sigma**2) + 1j * k0 * x)

    elif packet == "plane_wave":
        winding = sec.get_int("winding", 1)

        def psi_fn(x):
            return np.exp(2j * math.pi * winding * x / length)

    else:
        raise ConfigurationError(f"[schrodinger] unknown packet {packet!r}")
    return WavefunctionGrid.from_callable(
        psi_fn, n=n, length=length, constants=cfg.constants,
        potential=cfg.potential, center=center,
    )


def _run_schrodinger(cfg: RunConfig) -> RunResult:
    sec = cfg.sections["schrodinger"]
    wf = _make_packet(sec, cfg)

    start = time.perf_counter()
    history = split_step_propagate(wf, cfg.dt, cfg.steps, stride=cfg.stride)
    frames = history.times.size
    norms = np.empty(frames)
    energies = np.empty(frames)
    x_mean = np.empty(frames)
    x_var = np.empty(frames)
    for i in range(frames):
        frame = history.frame(i)
        norms[i] = frame.norm_squared()
        energies[i] = dirac_energy(frame)
        d = np.abs(frame.psi) ** 2 * frame.spacing
        x_mean[i] = float(np.sum(frame.x * d))
        x_var[i] = float(np.sum((frame.x - x_mean[i]) ** 2 * d))

    series = {}
    columns = ["t", "norm_sq", "energy", "x_mean", "x_var"]
    rows = [
        [history.times[i], norms[i], energies[i], x_mean[i], x_var[i]]
        for i in range(frames)
    ]
    series["observables"] = render_csv(columns, rows)

    if "trace_seeds" in sec.keys():
        seeds = np.sort(sec.get_floats("trace_seeds"))
        fields = madelung_history(history)
        tset = trace_bohmian(fields, history.times, seeds)
        cols = ["t"] + [f"traj_{k}" for k in range(seeds.size)]
        rows = [
            [tset.times[i], *tset.positions[:, i]] for i in range(tset.times.size)
        ]
        series["bohmian_trajectories"] = render_csv(cols, rows)

    wall = time.perf_counter() - start
    f0 = madelung_fields(history.frame(0))
    collective0 = collective_energy(f0, wf.potential, cfg.constants)
    drifts = {
        "norm_drift": float(np.max(np.abs(norms - 1.0))),
        "energy_drift": float(
            np.max(np.abs(energies - energies[0])) / max(abs(energies[0]), 1e-300)
        ),
        "collectivization_mismatch": abs(collective0 - energies[0])
        / max(abs(energies[0]), 1e-300),
    }
    failures = _gate_invariants(drifts, cfg.tolerances)
    summary = {
        "scenario": "schrodinger",
        "initial_energy": float(energies[0]),
        "final_energy": float(energies[-1]),
        "invariant_drifts": drifts,
        "wall_time_s": wall,
    }
    return RunResult(
        status="invariant_failure" if failures else "ok",
        scenario="schrodinger",
        summary=summary,
        series=series,
        failures=failures,
    )


def _run_meanfield(cfg: RunConfig) -> RunResult:
    sec = cfg.sections["meanfield"]
    model = _electronic_model(cfg)
    psi = sec.get_complexes("psi", _REQUIRED)
    psi = psi / np.linalg.norm(psi)
    state = MeanFieldState(q=sec.get_float("q", 0.0), p=sec.get_float("p", 0.0), psi=psi)

    start = time.perf_counter()
    traj = meanfield_evolve(
        state, cfg.potential, model, cfg.constants, cfg.dt, cfg.steps, stride=cfg.stride
    )
    wall = time.perf_counter() - start

    d = model.dim
    columns = ["t", "q", "p", "energy", "norm"] + [f"pop_{j}" for j in range(d)]
    rows = [
        [
            traj.times[i], traj.q[i], traj.p[i], traj.energy[i], traj.norm[i],
            *np.abs(traj.psi[i]) ** 2,
        ]
        for i in range(traj.times.size)
    ]
    drifts = {"energy_drift": traj.energy_drift(), "norm_drift": traj.norm_drift()}
    failures = _gate_invariants(drifts, cfg.tolerances)
    summary = {
        "scenario": "meanfield",
        "initial_energy": float(traj.energy[0]),
        "final_energy": float(traj.energy[-1]),
        "invariant_drifts": drifts,
        "wall_time_s": wall,
    }
    return RunResult(
        status="invariant_failure" if failures else "ok",
        scenario="meanfield",
        summary=summary,
        series={"trajectory": render_csv(columns, rows)},
        failures=failures,
    )


def _run_ef(cfg: RunConfig) -> RunResult:
    sec = cfg.sections["ef"]
    model = _electronic_model(cfg)
    variant = sec.get_str("variant", "hamiltonian")
    q = sec.get_floats("q", _REQUIRED)
    p = sec.get_floats("p", _REQUIRED)
    w = sec.get_floats("w", np.full(q.size, 1.0 / q.size))
    ens = BohmionEnsemble.from_raw_weights(q, p, w)

    rhos = []
    for a in range(ens.n):
        key_vec, key_mat = f"state_{a + 1}", f"matrix_{a + 1}"
        if key_vec in sec.keys():
            v = sec.get_complexes(key_vec)
            v = v / np.linalg.norm(v)
            rhos.append(ens.w[a] * np.outer(v, v.conj()))
        elif key_mat in sec.keys():
            rhos.append(sec.get_matrix(key_mat))
        else:
            raise ConfigurationError(
                f"[ef] needs state_{a + 1} (pure vector) or matrix_{a + 1} for particle {a + 1}"
            )
    state = EFBohmionState(ensemble=ens, rhos=np.asarray(rhos))

    start = time.perf_counter()
    traj = nonadiabatic.ef_evolve(
        state, model, cfg.kernel, None, cfg.constants, cfg.dt, cfg.steps,
        variant=variant, stride=cfg.stride,
    )
    wall = time.perf_counter() - start

    n, d = ens.n, model.dim
    columns = (
        ["t"]
        + [f"q_{a}" for a in range(n)]
        + [f"p_{a}" for a in range(n)]
        + ["energy", "total_momentum"]
        + [f"trace_{a}" for a in range(n)]
        + [f"purity_{a}" for a in range(n)]
    )
    mom = traj.momentum()
    rows = [
        [
            traj.times[i], *traj.q[i], *traj.p[i], traj.energy[i], mom[i],
            *traj.traces[i], *traj.purities[i],
        ]
        for i in range(traj.times.size)
    ]
    series = {"trajectory": render_csv(columns, rows)}

    rho_cols = ["t", "a"] + [
        name for j in range(d) for k in range(d) for name in (f"re_{j}{k}", f"im_{j}{k}")
    ]
    rho_rows = []
    for i in range(traj.times.size):
        for a in range(n):
            flat = traj.rhos[i, a].reshape(-1)
            entries = [x for z in flat for x in (z.real, z.imag)]
            rho_rows.append([traj.times[i], a, *entries])
    series["density_matrices"] = render_csv(rho_cols, rho_rows)

    drifts = {
        "energy_drift": traj.energy_drift(),
        "trace_drift": traj.trace_drift(),
        "purity_drift": traj.purity_drift(),
        "eigenvalue_drift": traj.eigenvalue_drift(),
        "total_trace_drift": float(
            np.max(np.abs(traj.traces.sum(axis=1) - traj.traces[0].sum()))
        ),
        "momentum_drift": float(np.max(np.abs(mom - mom[0]))),
    }
    failures = _gate_invariants(drifts, cfg.tolerances)
    summary = {
        "scenario": "ef_bohmions",
        "variant": variant,
        "n_particles": n,
        "electronic_dim": d,
        "initial_energy": float(traj.energy[0]),
        "final_energy": float(traj.energy[-1]),
        "invariant_drifts": drifts,
        "wall_time_s": wall,
    }
    return RunResult(
        status="invariant_failure" if failures else "ok",
        scenario="ef_bohmions",
        summary=summary,
        series=series,
        failures=failures,
    )


_RUNNERS = {
    "bohmions": _run_bohmions,
    "schrodinger": _run_schrodinger,
    "meanfield": _run_meanfield,
    "ef_bohmions": _run_ef,
}


def run_scenario(cfg: RunConfig) -> RunResult:
    return _RUNNERS[cfg.scenario](cfg)
