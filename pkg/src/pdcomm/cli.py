"""Command-line runner producing figure data as CSV plus a JSON summary.

Configs are flat ``key = value`` files.  Values resolve in increasing
priority: preset, ``--config`` file, ``PDCOMM_<KEY>`` environment variables,
``--set key=value`` and the dedicated flags.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, calibration, mc_sim
from .errors import ConfigError, NumericalError, PdcommError, SchemaMismatchError
from .metrics import (
    Alphabet,
    cm_baseline,
    cm_mi_curve,
    error_probability,
    fit_power_law,
    helstrom_bound,
    homodyne_crossover,
    mutual_information,
    optimal_helstrom,
    r_of_m,
)
from .optimizer import OptimizerSettings, optimize_displacement, sweep_sigma
from .photostats import Imperfections, PnrStrategy, homodyne_error
from ._kernels import KIND_ERROR, angle_objective
from .quadrature import phase_rule

log = logging.getLogger("pdcomm")

ENV_PREFIX = "PDCOMM_"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
OBJECTIVES = ("error", "mi", "rmap", "mc", "calibration", "bpsk", "sensitivity", "landscape")

# key -> (parser name, default)
SCHEMA: dict[str, tuple[str, object]] = {
    "name": ("str", ""),
    "objective": ("str", "error"),
    "nbar": ("floats", [1.0]),
    "m": ("ints", [1]),
    "eta": ("float", 1.0),
    "xi": ("float", 1.0),
    "nu": ("float", 0.0),
    "sigma_min": ("float", 0.0),
    "sigma_max": ("float", 1.2),
    "sigma_count": ("int", 61),
    "sigmas": ("floats", []),
    "mode": ("str", "warm"),
    "optimizer_grid": ("int", 12),
    "xatol": ("float", 1e-8),
    "maxiter": ("int", 500),
    "refine_jumps": ("bool", True),
    "baselines": ("bool", True),
    "columns": ("strs", []),
    "seed": ("int", 0),
    "workers": ("int", 1),
    # Monte Carlo
    "alphabet": ("str", "bpsk"),
    "n_shots": ("int", 100_000),
    "n_runs": ("int", 5),
    # sensitivity
    "nu_values": ("floats", []),
    "xi_values": ("floats", []),
    # landscape
    "landscape_points": ("int", 41),
    # calibration
    "inject_sigma": ("float", 0.215),
    "n_bins": ("int", 5000),
    "shots_per_bin": ("int", 500),
    "voltages": ("floats", []),
    "sigma_per_volt": ("float", 0.215),
}


# ------------------------------------------------------------------ config


def _parse_ints(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _parse_floats(text: str) -> list[float]:
    """Comma list, or ``start:stop:count`` for an inclusive linspace."""
    text = text.strip()
    if text.count(":") == 2 and "," not in text:
        a, b, n = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [float(p) for p in text.split(",") if p.strip()]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


PARSERS = {
    "str": lambda s: s.strip(),
    "strs": lambda s: [p.strip() for p in s.split(",") if p.strip()],
    "int": lambda s: int(s),
    "float": float,
    "bool": _parse_bool,
    "ints": _parse_ints,
    "floats": _parse_floats,
}


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    kind = SCHEMA[key][0]
    try:
        return PARSERS[kind](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None


def read_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from None
    return dict(parser["run"])


def preset_names() -> list[str]:
    folder = resources.files("pdcomm") / "presets"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    path = resources.files("pdcomm") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")


def preset_description(name: str) -> str:
    for line in preset_text(name).splitlines():
        if line.startswith("#"):
            return line.lstrip("# ").strip()
    return ""


@dataclass
class RunConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    @property
    def imp(self) -> Imperfections:
        return Imperfections(self.eta, self.xi, self.nu)

    @property
    def sigma_grid(self) -> np.ndarray:
        if self.sigmas:
            return np.asarray(self.sigmas, dtype=float)
        return np.linspace(self.sigma_min, self.sigma_max, self.sigma_count)

    @property
    def settings(self) -> OptimizerSettings:
        return OptimizerSettings(
            grid=self.optimizer_grid, xatol=self.xatol, maxiter=self.maxiter, refine_jumps=self.refine_jumps
        )

    def summary(self) -> dict:
        return {k: v for k, v in sorted(self.values.items())}


def build_config(layers: list[dict[str, str]]) -> RunConfig:
    """Merge raw string layers (later wins) over the defaults and validate."""
    values = {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in SCHEMA.items()}
    for layer in layers:
        for key, text in layer.items():
            values[key] = parse_value(key, text)
    validate(values)
    return RunConfig(values)


def validate(v: dict) -> None:
    if v["objective"] not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}, got {v['objective']!r}")
    if not v["nbar"] or any(n < 0 for n in v["nbar"]):
        raise ConfigError("nbar must be a nonempty list of nonnegative numbers")
    if not v["m"] or any(m < 1 for m in v["m"]):
        raise ConfigError("m must be a nonempty list of integers >= 1")
    try:
        Imperfections(v["eta"], v["xi"], v["nu"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not v["sigmas"]:
        if v["sigma_count"] < 1:
            raise ConfigError("sigma grid is empty (sigma_count < 1)")
        if v["sigma_min"] < 0 or v["sigma_max"] < v["sigma_min"]:
            raise ConfigError("need 0 <= sigma_min <= sigma_max")
    elif any(s < 0 for s in v["sigmas"]) or np.any(np.diff(v["sigmas"]) < 0):
        raise ConfigError("sigmas must be nonnegative and ascending")
    if v["mode"] not in ("warm", "cold"):
        raise ConfigError("mode must be warm or cold")
    if v["alphabet"] not in ("bpsk", "optimized"):
        raise ConfigError("alphabet must be bpsk or optimized")
    for key in ("optimizer_grid", "maxiter", "n_shots", "n_runs", "workers", "landscape_points", "shots_per_bin"):
        if v[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if v["seed"] < 0 or v["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if v["objective"] == "calibration" and v["n_bins"] < calibration.MIN_BINS:
        raise ConfigError(f"n_bins must be >= {calibration.MIN_BINS}")


def env_layer(environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in SCHEMA:
                out[key] = value
    return out


# ------------------------------------------------------------------ output


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


@dataclass
class Table:
    columns: list[str]
    rows: list[list]

    def select(self, names: list[str]) -> "Table":
        if not names:
            return self
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise ConfigError(f"unknown output columns {missing}; available: {self.columns}")
        idx = [self.columns.index(n) for n in names]
        return Table(list(names), [[r[i] for i in idx] for r in self.rows])


def write_csv(path: Path, table: Table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, (np.floating, float)):
        return float(fmt(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _pmap(func, jobs, workers: int):
    """Order-preserving map, in a process pool when ``workers`` > 1."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


# -------------------------------------------------------------- objectives


def _sweep_job(args):
    nbar, m, imp, sigmas, objective, settings, mode = args
    return sweep_sigma(nbar, m, imp, sigmas, objective, settings, mode=mode)


def _bpsk_value(nbar, sigma, m, imp, objective):
    if nbar <= 0:
        return 0.5 if objective == "error" else 0.0
    return optimize_displacement(Alphabet.bpsk(nbar), sigma, m, imp, objective).value


def run_sweep(cfg: RunConfig) -> tuple[Table, dict]:
    """Optimized-strategy σ sweep for the error or MI objective."""
    objective = cfg.objective
    nbar = cfg.nbar[0]
    imp, sigmas, ms = cfg.imp, cfg.sigma_grid, cfg.m
    jobs = [(nbar, m, imp, sigmas, objective, cfg.settings, cfg.mode) for m in ms]
    curves = _pmap(_sweep_job, jobs, cfg.workers)
    p = "pe" if objective == "error" else "mi"
    cm = [cm_baseline(nbar, s, imp.eta, objective).value for s in sigmas]
    helstrom = [optimal_helstrom(nbar, s, imp.eta)[0] for s in sigmas] if objective == "error" else None
    bpsk = {m: [_bpsk_value(nbar, s, m, imp, objective) for s in sigmas] if cfg.baselines else None for m in ms}

    single = len(ms) == 1
    columns = ["sigma"]
    if single:
        columns += [f"{p}_opt"] + ([f"{p}_bpsk"] if cfg.baselines else []) + [f"{p}_cm"]
        columns += [f"{p}_helstrom"] if helstrom else []
        columns += ["a1sq", "a2sq", "betasq"]
    else:
        columns += [f"{p}_cm"] + ([f"{p}_helstrom"] if helstrom else [])
        for m in ms:
            columns += [f"{p}_m{m}"] + ([f"{p}_bpsk_m{m}"] if cfg.baselines else [])
            columns += [f"a1sq_m{m}", f"a2sq_m{m}", f"betasq_m{m}"]
    rows = []
    for i, s in enumerate(sigmas):
        row = [s]
        if single:
            best = curves[0].results[i].best
            row += [best.value] + ([bpsk[ms[0]][i]] if cfg.baselines else []) + [cm[i]]
            row += [helstrom[i]] if helstrom else []
            row += [best.a1sq, best.a2sq, best.betasq]
        else:
            row += [cm[i]] + ([helstrom[i]] if helstrom else [])
            for m, curve in zip(ms, curves):
                best = curve.results[i].best
                row += [best.value] + ([bpsk[m][i]] if cfg.baselines else [])
                row += [best.a1sq, best.a2sq, best.betasq]
        rows.append(row)
    summary = {
        "jumps": {
            str(c.m): [
                {"sigma": j.sigma, "sigma_lo": j.sigma_lo, "sigma_hi": j.sigma_hi,
                 "a1sq_before": j.a1sq_before, "a1sq_after": j.a1sq_after}
                for j in c.jumps
            ]
            for c in curves
        },
        "local_optima_max": {str(c.m): max(len(r.local_optima) for r in c.results) for c in curves},
    }
    return Table(columns, rows), summary


def _rmap_job(args):
    nbar, m, imp, sigmas, settings, mi_cm = args
    return r_of_m(nbar, m, imp, sigmas, None, mi_cm=np.asarray(mi_cm))


def run_rmap(cfg: RunConfig) -> tuple[Table, dict]:
    """R(m) over the (n̄, m) grid plus a power-law fit per n̄."""
    imp, sigmas = cfg.imp, cfg.sigma_grid
    cms = {nbar: cm_mi_curve(nbar, sigmas, imp.eta) for nbar in cfg.nbar}
    jobs = [(nbar, m, imp, sigmas, None, cms[nbar]) for nbar in cfg.nbar for m in cfg.m]
    results = _pmap(_rmap_job, jobs, cfg.workers)
    rows = [[r.nbar, r.m, r.value] for r in results]
    fits = {}
    for nbar in cfg.nbar:
        vals = [r.value for r in results if r.nbar == nbar]
        if len(vals) >= 2 and all(v > 0 for v in vals):
            a, b = fit_power_law(cfg.m, vals)
            fits[fmt(nbar)] = {"a": a, "b": b}
    worst = {f"{fmt(r.nbar)},{r.m}": r.sigma_at_max for r in results}
    return Table(["nbar", "m", "R"], rows), {"power_law": fits, "sigma_at_max": worst}


def _mc_point(args):
    alphabet, sigma, m, beta, imp, n_runs, n_shots, seed = args
    strat = PnrStrategy(beta, m)
    runs = mc_sim.repeated_runs(alphabet, sigma, strat, imp, n_runs, n_shots, seed)
    pes = np.array([r.pe for r in runs])
    mis = np.array([r.mi for r in runs])
    std = lambda a: float(np.std(a, ddof=1)) if a.size > 1 else 0.0  # noqa: E731
    return (
        error_probability(alphabet, sigma, strat, imp),
        float(pes.mean()), std(pes),
        mutual_information(alphabet, sigma, strat, imp),
        float(mis.mean()), std(mis),
    )


def run_mc(cfg: RunConfig) -> tuple[Table, dict]:
    """Simulated experimental points against theory, with baselines."""
    nbar, imp, sigmas = cfg.nbar[0], cfg.imp, cfg.sigma_grid
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(sigmas) * len(cfg.m), dtype=np.uint64)
    jobs = []
    for i, s in enumerate(sigmas):
        for j, m in enumerate(cfg.m):
            if cfg.alphabet == "bpsk":
                alphabet = Alphabet.bpsk(nbar)
                beta = optimize_displacement(alphabet, s, m, imp, "error").beta
            else:
                curve = sweep_sigma(nbar, m, imp, [s], "error", cfg.settings)
                alphabet, beta = curve.results[0].best.alphabet, curve.results[0].best.beta
            jobs.append((alphabet, float(s), m, beta, imp, cfg.n_runs, cfg.n_shots, int(seeds[i * len(cfg.m) + j])))
    points = _pmap(_mc_point, jobs, cfg.workers)
    columns = ["sigma", "pe_homodyne", "pe_helstrom"]
    for m in cfg.m:
        columns += [f"pe_theory_m{m}", f"pe_mc_m{m}", f"pe_mc_std_m{m}", f"mi_theory_m{m}", f"mi_mc_m{m}", f"mi_mc_std_m{m}"]
    rows = []
    for i, s in enumerate(sigmas):
        a = Alphabet.bpsk(nbar)
        row = [s, homodyne_error(a.a1, a.a2, s, imp.eta), helstrom_bound(a, s, imp.eta)]
        for j in range(len(cfg.m)):
            row += list(points[i * len(cfg.m) + j])
        rows.append(row)
    return Table(columns, rows), {"n_runs": cfg.n_runs, "n_shots": cfg.n_shots}


def run_bpsk(cfg: RunConfig) -> tuple[Table, dict]:
    """BPSK with optimized displacement against the adjusted homodyne limit."""
    nbar, imp, sigmas = cfg.nbar[0], cfg.imp, cfg.sigma_grid
    a = Alphabet.bpsk(nbar)
    columns = ["sigma", "pe_homodyne", "pe_helstrom"] + [f"pe_m{m}" for m in cfg.m]
    rows = []
    for s in sigmas:
        row = [s, homodyne_error(a.a1, a.a2, s, imp.eta), helstrom_bound(a, s, imp.eta)]
        row += [optimize_displacement(a, s, m, imp, "error").value for m in cfg.m]
        rows.append(row)
    cross = {str(m): homodyne_crossover(nbar, m, imp, float(sigmas[-1])) for m in cfg.m}
    return Table(columns, rows), {"homodyne_crossover": cross}


def run_sensitivity(cfg: RunConfig) -> tuple[Table, dict]:
    """Optimized error and MI while varying dark counts or visibility."""
    nbar, sigmas = cfg.nbar[0], cfg.sigma_grid
    cases = [("nu", v, Imperfections(cfg.eta, cfg.xi, v)) for v in cfg.nu_values]
    cases += [("xi", v, Imperfections(cfg.eta, v, cfg.nu)) for v in cfg.xi_values]
    if not cases:
        raise ConfigError("sensitivity needs nu_values or xi_values")
    jobs = []
    for _, _, imp in cases:
        for m in cfg.m:
            for obj in ("error", "mi"):
                jobs.append((nbar, m, imp, sigmas, obj, cfg.settings, cfg.mode))
    curves = iter(_pmap(_sweep_job, jobs, cfg.workers))
    rows = []
    for param, value, _ in cases:
        for m in cfg.m:
            pe, mi = next(curves), next(curves)
            for i, s in enumerate(sigmas):
                rows.append([param, value, m, s, pe.results[i].best.value, mi.results[i].best.value])
    return Table(["parameter", "value", "m", "sigma", "pe", "mi"], rows), {}


def run_landscape(cfg: RunConfig) -> tuple[Table, dict]:
    """log10 P_E over (|α₁|², |β|²) with the better displacement sign, per σ."""
    nbar, imp = cfg.nbar[0], cfg.imp
    if nbar <= 0:
        raise ConfigError("landscape needs nbar > 0")
    m = cfg.m[0]
    eta, xi, nu = imp.astuple()
    n = cfg.landscape_points
    a1sq = np.linspace(0.0, nbar, n)
    theta = np.arcsin(np.sqrt(a1sq / (2 * nbar)))
    betasq = np.linspace(0.0, 4.0 * nbar, n)
    rows = []
    minima = {}
    for s in cfg.sigma_grid:
        phi, w = phase_rule(float(s), 128) if s > 0 else phase_rule(0.0)
        grid = np.empty((n, n))
        for i, th in enumerate(theta):
            for j, b2 in enumerate(betasq):
                b = np.sqrt(b2)
                grid[i, j] = min(
                    angle_objective(th, b, nbar, m, eta, xi, nu, phi, w, KIND_ERROR),
                    angle_objective(th, -b, nbar, m, eta, xi, nu, phi, w, KIND_ERROR),
                )
                rows.append([s, a1sq[i], b2, np.log10(max(grid[i, j], 1e-300))])
        minima[fmt(s)] = _grid_minima(grid, a1sq, betasq)
    return Table(["sigma", "a1sq", "betasq", "log10_pe"], rows), {"grid_minima": minima}


def _grid_minima(grid, xs, ys) -> list[dict]:
    """Strict local minima of a 2D grid against its 8 neighbours, sorted by value."""
    padded = np.pad(grid, 1, constant_values=np.inf)
    out = []
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            block = padded[i:i + 3, j:j + 3].copy()
            block[1, 1] = np.inf
            if grid[i, j] < block.min():
                out.append({"a1sq": xs[i], "betasq": ys[j], "pe": grid[i, j]})
    return sorted(out, key=lambda d: d["pe"])


def run_calibration(cfg: RunConfig, out_dir: Path, stem: str) -> tuple[Table, dict]:
    """Synthetic phase calibration; also writes the per-bin trace CSV."""
    nbar = cfg.nbar[0]
    kw = dict(nbar=nbar, eta=cfg.eta, xi=cfg.xi, n_bins=cfg.n_bins, shots_per_bin=cfg.shots_per_bin, nu=cfg.nu)
    run = calibration.calibrate(cfg.inject_sigma, seed=cfg.seed, **kw)
    calibration.write_trace_csv(out_dir / f"{stem}_trace.csv", run)
    summary = {
        "inject_sigma": cfg.inject_sigma,
        "sigma_hat": run.fit.sigma,
        "sigma_corrected": run.corrected_sigma,
        "chi2_p_value": run.fit.p_value,
        "gaussian_ok": run.fit.gaussian_ok,
        "shot_noise_floor": run.floor,
        "n_clipped": run.n_clipped,
    }
    if not cfg.voltages:
        return Table(["voltage", "sigma_true", "sigma_hat", "sigma_corrected"], []), summary
    runs, line = calibration.voltage_sweep(cfg.voltages, cfg.sigma_per_volt, seed=cfg.seed, corrected=True, **kw)
    rows = [
        [v, cfg.sigma_per_volt * v, r.fit.sigma, r.corrected_sigma] for v, r in zip(cfg.voltages, runs)
    ]
    summary["line"] = {"slope": line.slope, "intercept": line.intercept, "residuals": line.residuals}
    return Table(["voltage", "sigma_true", "sigma_hat", "sigma_corrected"], rows), summary


def execute(cfg: RunConfig, out_dir: Path, stem: str) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    obj = cfg.objective
    if obj in ("error", "mi"):
        table, extra = run_sweep(cfg)
    elif obj == "rmap":
        table, extra = run_rmap(cfg)
    elif obj == "mc":
        table, extra = run_mc(cfg)
    elif obj == "bpsk":
        table, extra = run_bpsk(cfg)
    elif obj == "sensitivity":
        table, extra = run_sensitivity(cfg)
    elif obj == "landscape":
        table, extra = run_landscape(cfg)
    else:
        table, extra = run_calibration(cfg, out_dir, stem)
    table = table.select(cfg.columns)
    csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
    write_csv(csv_path, table)
    write_json(json_path, {
        "version": __version__,
        "config": cfg.summary(),
        "columns": table.columns,
        "n_rows": len(table.rows),
        "results": extra,
    })
    return csv_path, json_path


# ----------------------------------------------------------------- compare


@dataclass
class ColumnReport:
    column: str
    max_dev: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_dev <= self.tolerance


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatchError(f"{path} is empty")
    return rows[0], rows[1:]


def compare_files(baseline, candidate, tol: float = 1e-9, per_column: dict | None = None, columns=None) -> list[ColumnReport]:
    """Per-column max absolute deviation; non-numeric cells must match exactly."""
    per_column = per_column or {}
    h1, r1 = read_csv(baseline)
    h2, r2 = read_csv(candidate)
    if h1 != h2:
        raise SchemaMismatchError(f"headers differ: {h1} vs {h2}")
    if len(r1) != len(r2):
        raise SchemaMismatchError(f"row counts differ: {len(r1)} vs {len(r2)}")
    names = columns or h1
    unknown = [c for c in names if c not in h1]
    if unknown:
        raise SchemaMismatchError(f"columns {unknown} not in files")
    out = []
    for name in names:
        k = h1.index(name)
        dev = 0.0
        for a, b in zip(r1, r2):
            try:
                dev = max(dev, abs(float(a[k]) - float(b[k])))
            except ValueError:
                if a[k] != b[k]:
                    dev = float("inf")
        out.append(ColumnReport(name, dev, per_column.get(name, tol)))
    return out


# --------------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdcomm", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or config and write CSV + JSON")
    run.add_argument("--config", type=Path)
    run.add_argument("--preset")
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--workers", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    cmp_ = sub.add_parser("compare", help="compare two CSV outputs column by column")
    cmp_.add_argument("baseline", type=Path)
    cmp_.add_argument("candidate", type=Path)
    cmp_.add_argument("--tol", type=float, default=1e-9)
    cmp_.add_argument("--column-tol", action="append", default=[], metavar="COLUMN=TOL")
    cmp_.add_argument("--columns", help="comma-separated subset of columns")

    sub.add_parser("presets", help="list shipped presets")
    return ap


def _run(args) -> int:
    if not args.config and not args.preset:
        raise ConfigError("give --config and/or --preset")
    layers = []
    if args.preset:
        layers.append(read_config_text(preset_text(args.preset), args.preset))
    if args.config:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        layers.append(read_config_text(text, str(args.config)))
    layers.append(env_layer())
    flags = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flags[k.strip()] = v
    if args.workers is not None:
        flags["workers"] = str(args.workers)
    if args.seed is not None:
        flags["seed"] = str(args.seed)
    layers.append(flags)
    cfg = build_config(layers)
    stem = cfg.name or args.preset or (args.config.stem if args.config else "run")
    csv_path, json_path = execute(cfg, args.out, stem)
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return EXIT_OK


def _compare(args) -> int:
    per_col = {}
    for item in args.column_tol:
        k, _, v = item.partition("=")
        try:
            per_col[k] = float(v)
        except ValueError:
            raise ConfigError(f"bad --column-tol {item!r}") from None
    cols = [c for c in args.columns.split(",")] if args.columns else None
    try:
        reports = compare_files(args.baseline, args.candidate, args.tol, per_col, cols)
    except OSError as exc:
        raise ConfigError(f"cannot read CSV: {exc}") from None
    for r in reports:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.column} max_dev={r.max_dev:.3e} tol={r.tolerance:.3e}")
    failed = [r.column for r in reports if not r.ok]
    if failed:
        print(f"FAIL columns: {', '.join(failed)}")
        return EXIT_FAIL
    print("PASS")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "presets":
            for name in preset_names():
                print(f"{name:8s} {preset_description(name)}")
            return EXIT_OK
        if args.command == "compare":
            return _compare(args)
        return _run(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, SchemaMismatchError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PdcommError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
