"""Command-line driver: flat key = value run files in, CSV tables out.

Usage::

    floqlab RUN_FILE [--threads N] [--out DIR]

Exit status is 0 on success, 1 for an invalid run file and 2 when a
numerical stage fails (sweeps still write their partial table).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .core import DriveParams, Form, bloch_vector, instantaneous_spectrum, magnetic_field
from .dissipation import BathParams, sweep_temperatures
from .dynamics import classical_llg, evolve_unitary
from .floquet import (
    adiabatic_quasienergy,
    floquet_solution,
    folded_gap_from_mu,
    ground_overlap,
    locate_resonances,
)
from .ladder import evolve_ladder, semiclassical_energy

EXPERIMENTS = (
    "quasienergy-scan",
    "overlap-scan",
    "dynamics",
    "llg",
    "ladder",
    "resonance-locate",
    "steady-sweep",
)

# experiments that need a single drive frequency
_SINGLE_FREQUENCY = {"dynamics", "llg", "ladder"}

_SCAN_DEFAULTS = {
    "quasienergy-scan": (0.1, 1.0, 451),
    "overlap-scan": (0.1, 1.0, 451),
    "resonance-locate": (0.19, 0.20, 101),
    "steady-sweep": (0.15, 0.6, 600),
}

_PERIOD_DEFAULTS = {"dynamics": 3000, "llg": 3000, "ladder": 50}


class ConfigError(ValueError):
    """Invalid run file; the message carries the offending line when known."""


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: tuple[str, ...]
    delta: float = 1.0
    epsilon: float = 1.0
    amplitude: float = 2.0
    omega0: Optional[float] = None
    form: Optional[str] = None
    omega0_min: Optional[float] = None
    omega0_max: Optional[float] = None
    omega0_points: Optional[int] = None
    steps_per_period: int = 4096
    samples_per_period: int = 64
    n_periods: Optional[int] = None
    n_half_width: int = 32
    n_max: int = 64
    grid: int = 256
    refine: int = 8
    lambdas: tuple[float, ...] = (0.001, 0.01, 0.1)
    gamma: float = 1.0
    cutoff: float = 500.0
    temperatures: tuple[float, ...] = (0.0,)
    output: Optional[str] = None

    def drive(self, experiment: str) -> DriveParams:
        form = self.form or ("sine_x" if experiment == "ladder" else "cosine_y")
        omega0 = self.omega0 if self.omega0 is not None else 1.0  # scans override it
        return DriveParams(self.delta, self.epsilon, self.amplitude, omega0, form)

    def scan_grid(self, experiment: str) -> np.ndarray:
        lo, hi, points = _SCAN_DEFAULTS[experiment]
        lo = self.omega0_min if self.omega0_min is not None else lo
        hi = self.omega0_max if self.omega0_max is not None else hi
        points = self.omega0_points if self.omega0_points is not None else points
        if not hi > lo:
            raise ConfigError(f"omega0_max ({hi}) must exceed omega0_min ({lo})")
        return np.linspace(lo, hi, points)

    def periods(self, experiment: str) -> int:
        return self.n_periods if self.n_periods is not None else _PERIOD_DEFAULTS[experiment]

    def stem(self, experiment: str) -> str:
        if self.output and len(self.experiment) == 1:
            return self.output
        prefix = f"{self.output}_" if self.output else ""
        return prefix + experiment.replace("-", "_")


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _float_list(text: str) -> tuple[float, ...]:
    items = [t for t in (s.strip() for s in text.replace(";", ",").split(",")) if t]
    if not items:
        raise ValueError("empty list")
    return tuple(_float(t) for t in items)


def _experiments(text: str) -> tuple[str, ...]:
    names = tuple(t.strip().lower() for t in text.split(",") if t.strip())
    if not names:
        raise ValueError("missing key: experiment")
    for name in names:
        if name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    return names


def _form(text: str) -> str:
    return Form.parse(text).value


_PARSERS: dict[str, Callable[[str], object]] = {
    "experiment": _experiments,
    "delta": _float,
    "epsilon": _float,
    "amplitude": _float,
    "omega0": _float,
    "form": _form,
    "omega0_min": _float,
    "omega0_max": _float,
    "omega0_points": _int,
    "steps_per_period": _int,
    "samples_per_period": _int,
    "n_periods": _int,
    "n_half_width": _int,
    "n_max": _int,
    "grid": _int,
    "refine": _int,
    "lambdas": _float_list,
    "gamma": _float,
    "cutoff": _float,
    "temperatures": _float_list,
    "output": str,
}

# must be strictly positive
_POSITIVE = ("omega0", "omega0_min", "omega0_max", "omega0_points", "steps_per_period",
             "samples_per_period", "n_periods", "n_half_width", "n_max", "grid", "gamma", "cutoff")


def parse_config(text: str) -> RunConfig:
    """Parse a flat ``key = value`` run file ('#' starts a comment)."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw.strip()!r}")
        if key not in _PARSERS:
            raise ConfigError(f"line {number}: unknown key: {key}")
        if key in values:
            raise ConfigError(f"line {number}: duplicate key: {key} (first set on line {lines[key]})")
        if key == "experiment" and not value:
            raise ConfigError(f"line {number}: missing key: experiment")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {number}: {key}: {exc}") from None
        lines[key] = number
    if "experiment" not in values:
        raise ConfigError("missing key: experiment")

    def where(key):
        return f"line {lines[key]}: " if key in lines else ""

    for key in _POSITIVE:
        if key in values and not values[key] > 0:
            raise ConfigError(f"{where(key)}{key} must be > 0, got {values[key]}")
    if "temperatures" in values and min(values["temperatures"]) < 0:
        raise ConfigError(f"{where('temperatures')}temperatures must be >= 0")
    if "refine" in values and values["refine"] < 0:
        raise ConfigError(f"{where('refine')}refine must be >= 0")
    if "lambdas" in values and min(values["lambdas"]) < 0:
        raise ConfigError(f"{where('lambdas')}lambdas must be >= 0")
    for name in values["experiment"]:
        if name in _SINGLE_FREQUENCY and "omega0" not in values:
            raise ConfigError(f"missing key: omega0 (required by {name})")
    if "omega0_points" in values and values["omega0_points"] < 3:
        raise ConfigError(f"{where('omega0_points')}omega0_points must be >= 3")
    return RunConfig(**values)


# --- experiments -----------------------------------------------------------------


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[Sequence[object]]
    failures: int = 0


def _parallel_map(fn, items, threads: int):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))
    return [fn(item) for item in items]


def _spectrum_row(args):
    params, omega0, grid = args
    p = params.with_omega0(omega0)
    try:
        sol = floquet_solution(p, grid=grid)
        mu = sol.mu_pos
        return (omega0, mu, abs(adiabatic_quasienergy(p)), folded_gap_from_mu(mu, omega0),
                ground_overlap(sol, p), "")
    except Exception as exc:
        return (omega0, math.nan, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def _scan(config: RunConfig, experiment: str, threads: int) -> list[tuple]:
    params = config.drive(experiment)
    return _parallel_map(_spectrum_row, [(params, float(w), config.grid) for w in config.scan_grid(experiment)],
                         threads)


def run_quasienergy_scan(config, threads):
    rows = _scan(config, "quasienergy-scan", threads)
    out = [(r[0], r[1], r[2], r[3], r[5]) for r in rows]
    return [Table("quasienergy_scan", ("omega0", "mu", "mu_adiabatic", "folded_gap", "error"),
                  out, sum(bool(r[-1]) for r in out))]


def run_overlap_scan(config, threads):
    rows = _scan(config, "overlap-scan", threads)
    out = [(r[0], r[4], r[5]) for r in rows]
    return [Table("overlap_scan", ("omega0", "overlap", "error"), out, sum(bool(r[-1]) for r in out))]


def run_dynamics(config, threads):
    params = config.drive("dynamics")
    psi0 = instantaneous_spectrum(params, 0.0).ground
    if psi0 is None:
        raise NumericalError("ground state at t = 0 is degenerate")
    traj = evolve_unitary(params, psi0, config.periods("dynamics"), config.steps_per_period,
                          config.samples_per_period)
    # close the record with the final stroboscopic sample
    times = np.append(traj.times, traj.strobe_times[-1])
    sigma = np.vstack([traj.sigma, bloch_vector(traj.strobe_states[-1])])
    e_ex = np.append(traj.e_ex, traj.strobe_e_ex[-1])
    rows = [(t, *s, e) for t, s, e in zip(times, sigma, e_ex)]
    return [Table("dynamics", ("t", "sigma_x", "sigma_y", "sigma_z", "e_ex"), rows)]


def run_llg(config, threads):
    params = config.drive("llg")
    b0 = magnetic_field(params, 0.0)
    norm = np.linalg.norm(b0)
    if norm == 0.0:
        raise NumericalError("field vanishes at t = 0; no ground-state direction")
    rows = []
    for lam in config.lambdas:
        traj = classical_llg(params, b0 / norm, lam, config.periods("llg"), config.steps_per_period,
                             config.samples_per_period)
        rows.extend((lam, t, *m, e) for t, m, e in zip(traj.times, traj.M, traj.e_ex))
    return [Table("llg", ("lambda", "t", "m_x", "m_y", "m_z", "e_ex"), rows)]


def run_ladder(config, threads):
    params = config.drive("ladder")
    if params.form is not Form.SINE_X:
        raise ConfigError("the ladder experiment needs form = sine_x")
    evo = evolve_ladder(params, config.n_half_width, config.periods("ladder"), config.samples_per_period,
                        auto_widen=True)
    energy = semiclassical_energy(params, evo.times, evo.p_plus, evo.p_minus)
    rows = [(t, pp, pm, nrm, e) for t, pp, pm, nrm, e in
            zip(evo.times, evo.p_plus, evo.p_minus, evo.norms, energy)]
    return [Table("ladder", ("t", "p_plus", "p_minus", "norm", "energy_semiclassical"), rows)]


def run_resonance_locate(config, threads):
    params = config.drive("resonance-locate")
    grid = config.scan_grid("resonance-locate")
    found = locate_resonances(params, (grid[0], grid[-1]), grid.size)
    rows = [(r.omega0_star, r.folded_gap, *r.bracket) for r in found]
    return [Table("resonance_locate", ("omega0_star", "folded_gap", "bracket_lo", "bracket_hi"), rows)]


def run_steady_sweep(config, threads):
    params = config.drive("steady-sweep")
    baths = [BathParams(config.gamma, config.cutoff, t) for t in config.temperatures]
    tables = sweep_temperatures(params, baths, config.scan_grid("steady-sweep"), config.n_max,
                                config.refine, threads)
    out = []
    for bath, rows in zip(baths, tables):
        data = [(r.omega0, r.folded_gap, r.rho_pp, r.e_ex_per, r.error or "") for r in rows]
        out.append(Table(f"steady_sweep_T{bath.temperature:g}",
                         ("omega0", "folded_gap", "rho_pp", "e_ex_per", "error"), data,
                         sum(bool(r.error) for r in rows)))
    return out


_RUNNERS = {
    "quasienergy-scan": run_quasienergy_scan,
    "overlap-scan": run_overlap_scan,
    "dynamics": run_dynamics,
    "llg": run_llg,
    "ladder": run_ladder,
    "resonance-locate": run_resonance_locate,
    "steady-sweep": run_steady_sweep,
}


# --- output ----------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.15e}"


def _preamble(config: RunConfig, experiment: str) -> list[str]:
    params = config.drive(experiment)
    resolved = {"form": params.form.value}
    if experiment in _SCAN_DEFAULTS:
        grid = config.scan_grid(experiment)
        resolved.update(omega0="scanned", omega0_min=grid[0], omega0_max=grid[-1],
                        omega0_points=grid.size)
    if experiment in _PERIOD_DEFAULTS:
        resolved["n_periods"] = config.periods(experiment)
    lines = [f"# floqlab {__version__}", f"# experiment = {experiment}"]
    for f in dataclasses.fields(config):
        if f.name == "experiment":
            continue
        value = resolved.get(f.name, getattr(config, f.name))
        if isinstance(value, tuple):
            value = ", ".join(_cell(v) for v in value)
        elif value is None:
            value = "default"
        elif not isinstance(value, str):
            value = _cell(value)
        lines.append(f"# {f.name} = {value}")
    return lines


def write_table(path: Path, table: Table, preamble: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in preamble:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])


def run(config: RunConfig, out_dir: Path | str = ".", threads: int = 1) -> list[Path]:
    """Run every experiment in ``config``; returns the written CSV paths.

    Raises :class:`NumericalError` after writing if any sweep row failed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written, failures = [], []
    for experiment in config.experiment:
        tables = _RUNNERS[experiment](config, threads)
        stem = config.stem(experiment)
        default = experiment.replace("-", "_")
        for table in tables:
            name = stem + table.name[len(default):]
            path = out_dir / f"{name}.csv"
            write_table(path, table, _preamble(config, experiment))
            written.append(path)
            if table.failures:
                failures.append(f"{path.name}: {table.failures} failed row(s)")
    if failures:
        raise NumericalError("; ".join(failures))
    return written


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="floqlab", description=__doc__.splitlines()[0])
    parser.add_argument("config", type=Path, help="run file with key = value lines")
    parser.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.config.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"floqlab: cannot read {args.config}: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"floqlab: {args.config}: {exc}", file=sys.stderr)
        return 1
    if args.threads < 1:
        print("floqlab: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        paths = run(config, args.out, args.threads)
    except ConfigError as exc:
        print(f"floqlab: {args.config}: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"floqlab: numerical failure: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
