"""Command-line front end: run simulations, ensembles, sweeps, diagnostics.

Usage: nia-sim <mode> --config <file-or-preset> [--set key=value ...]
                [--jobs N] [--seed S] [--out DIR]

Outputs are CSV files with a `#`-prefixed metadata preamble (config hash,
all effective parameters, seeds); the body below the header row is
byte-reproducible given the same config.  Exit codes: 0 success, 1 usage
error, 2 numeric failure, 3 check-mode threshold failure.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
import time

import numpy as np

from . import evolve, kernel, metrics, model
from .config import (ConfigError, RunConfig, apply_sweep_value, blocking,
                     config_hash, effective_items, load_config, validate)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_THRESHOLD = 3

_NUMERIC_ERRORS = (
    evolve.NumericEvolutionError,
    kernel.ResolutionError,
    metrics.BlockLeakageError,
    metrics.GridMismatchError,
)


def _initial_vector(cfg: RunConfig):
    """Initial state for the configured system; explicit amplitudes normalized."""
    name = cfg.effective_initial()
    named2 = {
        "zero": np.array([1.0, 0.0], dtype=complex),
        "one": np.array([0.0, 1.0], dtype=complex),
        "plus": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    }
    dim = cfg.schedule().dim
    if name in named2:
        driven = named2[name]
        if cfg.system == "spectator":
            return np.kron(driven, np.array([1.0, 0.0], dtype=complex))
        if dim != 2:
            raise ConfigError(f"initial_state {name!r} needs a two-level system")
        return driven
    if name == "pair01":
        if cfg.system != "pair":
            raise ConfigError("initial_state 'pair01' needs system = pair")
        return np.array([0.0, 1.0, 0.0, 0.0], dtype=complex)
    amps = np.array([complex(part) for part in name.split(",")])
    if cfg.system == "spectator" and amps.shape == (2,):
        amps = np.kron(amps, np.array([1.0, 0.0], dtype=complex))
    if amps.shape != (dim,):
        raise ConfigError(f"explicit initial state needs {dim} amplitudes")
    norm = np.linalg.norm(amps)
    if norm == 0.0:
        raise ConfigError("explicit initial state must be nonzero")
    return amps / norm


def _noise_realization(cfg: RunConfig, index: int):
    spec = cfg.noise_spec()
    if spec is None:
        return None
    return model.realize_noise(spec, index)


def _evolution_config(cfg: RunConfig) -> evolve.EvolutionConfig:
    return evolve.EvolutionConfig(dt=cfg.dt, store_every=cfg.store_every)


def _run_member(cfg: RunConfig, index: int) -> metrics.Trajectory:
    """One trajectory of the configured run (worker for parallel ensembles)."""
    return evolve.evolve_stepwise(cfg.schedule(), _noise_realization(cfg, index),
                                  _evolution_config(cfg), _initial_vector(cfg))


def _preamble(cfg: RunConfig, mode: str, extra: dict | None = None) -> list[str]:
    lines = [f"# nia-sim {mode}", f"# config_hash = {config_hash(cfg)}"]
    if cfg.timestamps:
        lines.append(f"# generated = {time.strftime('%Y-%m-%dT%H:%M:%S%z')}")
    for key, value in effective_items(cfg):
        lines.append(f"# {key} = {value}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    return lines


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _write_rows(path: str, preamble: list[str], header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in preamble:
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


_TRAJ_COLUMNS = ("pop0", "pop1", "im_coherence", "fidelity_e0", "gap", "noise")


def write_trajectory(path: str, cfg: RunConfig, traj: metrics.Trajectory,
                     mode: str = "simulate") -> None:
    header = ["t", *_TRAJ_COLUMNS]
    rows = zip(traj.times, *(traj.metric(name) for name in _TRAJ_COLUMNS))
    _write_rows(path, _preamble(cfg, mode), header, rows)


def write_summary(path: str, cfg: RunConfig, summary: metrics.EnsembleSummary,
                  mode: str = "ensemble") -> None:
    header = ["t"]
    cols = [summary.times]
    for name in _TRAJ_COLUMNS:
        header += [f"mean_{name}", f"se_{name}"]
        cols += [summary.mean[name], summary.se[name]]
    extra = {"realizations": summary.m,
             "seeds": " ".join(str(s) for s in summary.meta.get("seeds", []))}
    _write_rows(path, _preamble(cfg, mode, extra), header, zip(*cols))


def _run_ensemble(cfg: RunConfig, jobs: int) -> metrics.EnsembleSummary:
    indices = range(cfg.realizations)
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            trajs = list(pool.map(_run_member, [cfg] * cfg.realizations, indices))
    else:
        trajs = [_run_member(cfg, i) for i in indices]
    return metrics.aggregate(trajs)


def _mode_simulate(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    traj = _run_member(cfg, 0)
    write_trajectory(os.path.join(out_dir, "trajectory.csv"), cfg, traj)
    print(f"simulate: final pop0 = {traj.pop0[-1]:.6f}, pop1 = {traj.pop1[-1]:.6f}")
    return EXIT_OK


def _mode_ensemble(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    summary = _run_ensemble(cfg, jobs)
    write_summary(os.path.join(out_dir, "ensemble.csv"), cfg, summary)
    print(f"ensemble: M = {summary.m}, final mean pop0 = "
          f"{summary.mean['pop0'][-1]:.6f} (se {summary.se['pop0'][-1]:.2g})")
    return EXIT_OK


def _mode_sweep(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    param = cfg.sweep_parameter
    base_hash = config_hash(cfg, exclude=(param,))
    summary_rows = []
    for i, value in enumerate(cfg.sweep_values):
        sub = apply_sweep_value(cfg, value)
        if config_hash(sub, exclude=(param,)) != base_hash:
            raise RuntimeError("sweep touched a non-swept parameter")
        bad = blocking(validate(sub))
        if bad:
            raise ConfigError(f"sweep value {value:g}: {bad[0]}")
        member_path = os.path.join(out_dir, f"sweep_{i:03d}.csv")
        if sub.has_noise and sub.realizations > 1:
            summary = _run_ensemble(sub, jobs)
            write_summary(member_path, sub, summary, mode="sweep")
            finals = [summary.mean[name][-1] for name in _TRAJ_COLUMNS[:4]]
        else:
            traj = _run_member(sub, 0)
            write_trajectory(member_path, sub, traj, mode="sweep")
            finals = [traj.metric(name)[-1] for name in _TRAJ_COLUMNS[:4]]
        summary_rows.append([value, *finals])
    header = [param.replace(".", "_"), "final_pop0", "final_pop1",
              "final_im_coherence", "final_fidelity_e0"]
    extra = {"sweep_base_hash": base_hash}
    _write_rows(os.path.join(out_dir, "sweep_summary.csv"),
                _preamble(cfg, "sweep", extra), header, summary_rows)
    print(f"sweep: {len(cfg.sweep_values)} values of {param} written")
    return EXIT_OK


def _mode_kernel(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    schedule = cfg.schedule()
    noise = _noise_realization(cfg, 0)
    memory = kernel.solve_memory_equation(schedule, noise, cfg.kernel_points)
    rows = []
    for i, t in enumerate(memory.times):
        defect = abs(memory._p[i] * memory._history[i])
        gtt = abs(kernel.kernel_value(schedule, noise, t, t))
        rows.append([t, abs(memory.psi0[i]) ** 2, memory.psi0[i].real,
                     memory.psi0[i].imag, defect, gtt])
    header = ["t", "psi0_abs2", "psi0_re", "psi0_im", "defect", "kernel_mod_diag"]
    _write_rows(os.path.join(out_dir, "kernel.csv"), _preamble(cfg, "kernel"),
                header, rows)
    print(f"kernel: max defect = {kernel.max_defect(memory):.6g}, "
          f"|psi0(T)|^2 = {abs(memory.psi0[-1]) ** 2:.6f}")
    return EXIT_OK


def _mode_pulse_export(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    schedule = cfg.schedule()
    steps = evolve.decompose_pulse(schedule, _noise_realization(cfg, 0),
                                   _evolution_config(cfg))
    path = os.path.join(out_dir, "pulses.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _preamble(cfg, "pulse-export"):
            fh.write(line + "\n")
        fh.write("# t_start\tduration\txy_amplitude\txy_phase\tz_angle\n")
        t_start = 0.0
        for step in steps:
            fields = (t_start, step.duration, step.xy_amplitude,
                      step.xy_phase, step.z_angle)
            fh.write("\t".join(_fmt(x) for x in fields) + "\n")
            t_start += step.duration
    print(f"pulse-export: {len(steps)} steps written to {path}")
    return EXIT_OK


def _infidelity(a, b) -> float:
    return abs(1.0 - abs(np.vdot(a, b)) ** 2)


def _mode_oracle_check(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    schedule = cfg.schedule()
    noise = _noise_realization(cfg, 0)
    ecfg = _evolution_config(cfg)
    initial = _initial_vector(cfg)
    final_step = evolve.final_state_stepwise(schedule, noise, ecfg, initial)
    sampling = "exact" if noise is None else "hold"
    final_orc = evolve.final_state_oracle(schedule, noise, ecfg, initial,
                                          noise_sampling=sampling)
    inf = _infidelity(final_step, final_orc)
    bound = 1e-6 if noise is None else 1e-4
    verdict = "PASS" if inf < bound else "FAIL"
    line = f"oracle-check: infidelity = {inf:.3e} (bound {bound:.0e}) {verdict}"
    print(line)
    with open(os.path.join(out_dir, "oracle_check.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(_preamble(cfg, "oracle-check")) + "\n" + line + "\n")
    return EXIT_OK if inf < bound else EXIT_THRESHOLD


def _mode_spectator_check(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    from dataclasses import replace

    base_cfg = replace(cfg, system="single")
    spec_cfg = replace(cfg, system="spectator")
    base = _run_member(base_cfg, 0)
    embedded = _run_member(spec_cfg, 0)
    err = metrics.spectator_error(base, embedded)
    verdict = "PASS" if err < 0.01 else "FAIL"
    line = (f"spectator-check: max relative pop0 error = {err:.4%} "
            f"(J12 = {cfg.j12:g}, bound 1%) {verdict}")
    print(line)
    with open(os.path.join(out_dir, "spectator_check.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(_preamble(cfg, "spectator-check")) + "\n" + line + "\n")
    return EXIT_OK if err < 0.01 else EXIT_THRESHOLD


_MODE_RUNNERS = {
    "simulate": _mode_simulate,
    "ensemble": _mode_ensemble,
    "sweep": _mode_sweep,
    "kernel": _mode_kernel,
    "pulse-export": _mode_pulse_export,
    "oracle-check": _mode_oracle_check,
    "spectator-check": _mode_spectator_check,
}


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="nia-sim",
        description="Noise-induced adiabaticity simulations for driven qubits.")
    parser.add_argument("mode", choices=sorted(_MODE_RUNNERS))
    parser.add_argument("--config", required=True,
                        help="config file path or preset name (fig3a ... fig4b)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None,
                        help="override noise.seed")
    parser.add_argument("--out", default=None, help="output directory")
    return parser.parse_args(argv)


def run(cfg: RunConfig, jobs: int = 1) -> int:
    """Validated dispatch; raises on usage problems, returns an exit code."""
    violations = validate(cfg)
    bad = blocking(violations)
    if bad:
        raise ConfigError("; ".join(bad))
    for warning in violations:
        if warning.startswith("warning:"):
            print(warning, file=sys.stderr)
    out_dir = cfg.out or "."
    os.makedirs(out_dir, exist_ok=True)
    return _MODE_RUNNERS[cfg.mode](cfg, out_dir, max(1, jobs))


def main(argv=None) -> int:
    try:
        args = _parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    overrides = {}
    for item in args.set:
        if "=" not in item:
            print(f"nia-sim: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_USAGE
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["noise.seed"] = str(args.seed)
    if args.out is not None:
        overrides["out"] = args.out
    try:
        cfg = load_config(args.config, overrides)
        return run(cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"nia-sim: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as exc:
        print(f"nia-sim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ArithmeticError) as exc:
        print(f"nia-sim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
