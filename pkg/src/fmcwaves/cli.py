"""Command-line harness: config parsing, runs, artifact persistence, cross-checks.

Commands: check | speed | wave | evolve | crosscheck, each driven by a JSON
config validated against an exact schema (unknown keys rejected) before any
grid is allocated.  Exit codes: 0 = pass/verified, 1 = error, 2 = inconclusive
or refused.  Artifacts are deterministic: identical config and seed produce
byte-identical JSON, and CSV floats carry 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .evolution import (
    BlowUpError,
    EvolutionParams,
    EvolutionTrace,
    check_log_bound,
    check_lower_bound,
    evolve,
    functional_Fc,
)
from .forcing import (
    ConditionReport,
    Forcing,
    FourierMode,
    build_condition_report,
)
from .grid import (
    PeriodicGrid,
    ScalarField,
    VectorField,
    constant_field,
    divergence,
    gradient,
    integrate,
    make_grid,
    perimeter_indicator,
)
from .shooting import NoClassicalWaveError, OracleResult, solve_classical_wave_1d
from .variational import (
    BracketFailureError,
    EmptySupportError,
    HypothesisNotVerifiedError,
    InfeasibleForcingError,
    MuSample,
    SolverStallError,
    WaveSolution,
    eval_Gc,
    extract_profile,
    support_boundary_zeros,
    wave_speed,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2

COMMANDS = ("check", "speed", "wave", "evolve", "crosscheck")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing


def _require_keys(obj: Any, where: str, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{where}: missing required key '{key}'")
    allowed = set(required) | set(optional)
    unknown = sorted(k for k in obj if k not in allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _as_number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_bool(value: Any, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where}: expected a boolean, got {value!r}")
    return value


def parse_forcing(obj: Any, dimension: int, where: str = "forcing") -> Forcing:
    _require_keys(obj, where, ("a0", "modes"))
    a0 = _as_number(obj["a0"], f"{where}.a0")
    if not isinstance(obj["modes"], list):
        raise ConfigError(f"{where}.modes: expected a list")
    modes = []
    for i, mode in enumerate(obj["modes"]):
        mwhere = f"{where}.modes[{i}]"
        _require_keys(mode, mwhere, ("k", "cos", "sin"))
        if not isinstance(mode["k"], list) or not mode["k"]:
            raise ConfigError(f"{mwhere}.k: expected a nonempty list of integers")
        k = tuple(_as_int(ki, f"{mwhere}.k[{j}]") for j, ki in enumerate(mode["k"]))
        if len(k) != dimension:
            raise ConfigError(f"{mwhere}.k: length {len(k)} does not match dimension {dimension}")
        if all(ki == 0 for ki in k):
            raise ConfigError(f"{mwhere}.k: wave vector must be nonzero")
        modes.append(
            FourierMode(k, _as_number(mode["cos"], f"{mwhere}.cos"), _as_number(mode["sin"], f"{mwhere}.sin"))
        )
    return Forcing(dimension, a0, tuple(modes))


_COMMAND_KEYS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "check": ((), ("levels",)),
    "speed": ((), ("tol_c", "tol_obj")),
    "wave": ((), ("tol_c", "tol_obj", "tau")),
    "evolve": (("T",), ("sigma", "snapshot_stride", "c", "u0", "write_snapshots", "tol_c", "tol_obj")),
    "crosscheck": (
        (),
        ("T", "sigma", "snapshot_stride", "tol_c", "tol_obj", "tau", "seed", "oracle_steps", "stages"),
    ),
}

_DEFAULTS = {
    "tol_c": 1e-3,
    "tol_obj": 1e-7,
    "tau": 1e-3,
    "sigma": 0.2,
    "snapshot_stride": 0,
    "levels": 64,
    "seed": 0,
}


class RunConfig:
    """Validated config: dimension, resolution, forcing, one command section."""

    def __init__(self, raw: dict):
        _require_keys(raw, "config", ("dimension", "resolution", "forcing", "command"))
        self.dimension = _as_int(raw["dimension"], "dimension")
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension: must be 1 or 2, got {self.dimension}")
        self.resolution = _as_int(raw["resolution"], "resolution")
        if self.resolution < 4:
            raise ConfigError(f"resolution: must be >= 4, got {self.resolution}")
        self.forcing = parse_forcing(raw["forcing"], self.dimension)
        command = raw["command"]
        if not isinstance(command, dict) or len(command) != 1:
            raise ConfigError("command: expected an object with exactly one command section")
        (self.command,) = command.keys()
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command '{self.command}'")
        required, optional = _COMMAND_KEYS[self.command]
        section = command[self.command]
        _require_keys(section, f"command.{self.command}", required, optional)
        self.params = dict(section)
        self._validate_params()
        self.raw = raw

    def _validate_params(self) -> None:
        p = self.params
        for key in ("tol_c", "tol_obj", "tau", "sigma", "T"):
            if key in p:
                val = _as_number(p[key], f"command.{self.command}.{key}")
                if val <= 0.0:
                    raise ConfigError(f"command.{self.command}.{key}: must be positive")
                p[key] = val
        for key in ("snapshot_stride", "levels", "seed", "oracle_steps"):
            if key in p:
                p[key] = _as_int(p[key], f"command.{self.command}.{key}")
        if "write_snapshots" in p:
            p["write_snapshots"] = _as_bool(p["write_snapshots"], "command.write_snapshots")
        if "c" in p and p["c"] != "auto":
            p["c"] = _as_number(p["c"], f"command.{self.command}.c")
        if "u0" in p:
            p["u0"] = parse_forcing(self.params["u0"], self.dimension, f"command.{self.command}.u0")
        if "stages" in p:
            stages = p["stages"]
            _require_keys(stages, "command.crosscheck.stages", (), ("speed", "oracle", "evolve"))
            for name, stage in stages.items():
                _require_keys(
                    stage, f"command.crosscheck.stages.{name}", (), ("resolution", "dimension", "steps")
                )
                if "dimension" in stage and _as_int(stage["dimension"], "stage.dimension") != self.dimension:
                    raise ConfigError(
                        f"command.crosscheck.stages.{name}: mismatched dimension between sub-configs"
                    )
                if "resolution" in stage:
                    stage["resolution"] = _as_int(stage["resolution"], f"stages.{name}.resolution")

    def get(self, key: str, default: Any = None) -> Any:
        if key in self.params:
            return self.params[key]
        if default is not None:
            return default
        return _DEFAULTS.get(key)

    def grid(self) -> PeriodicGrid:
        return make_grid(self.dimension, self.resolution)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return RunConfig(raw)


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return "%.17g" % x


def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_profile_csv(path: Path, field: ScalarField) -> None:
    grid = field.grid
    path.parent.mkdir(parents=True, exist_ok=True)
    finite = field.finite_mask()
    with open(path, "w", encoding="utf-8") as fh:
        if grid.dimension == 1:
            fh.write("y,psi\n")
            y = grid.axis()
            for i in range(grid.n):
                val = _fmt(field.values[i]) if finite[i] else "-inf"
                fh.write(f"{_fmt(y[i])},{val}\n")
        else:
            fh.write("y1,y2,psi\n")
            y = grid.axis()
            for i in range(grid.n):
                for j in range(grid.n):
                    val = _fmt(field.values[i, j]) if finite[i, j] else "-inf"
                    fh.write(f"{_fmt(y[i])},{_fmt(y[j])},{val}\n")


def read_profile_csv(path: Path, grid: PeriodicGrid) -> ScalarField:
    values = np.zeros(grid.shape)
    sentinel = np.zeros(grid.shape, dtype=bool)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if len(rows) != grid.num_nodes:
        raise ValueError(f"profile CSV has {len(rows)} rows, expected {grid.num_nodes}")
    for idx, row in enumerate(rows):
        token = row[-1]
        pos = np.unravel_index(idx, grid.shape)
        if token == "-inf":
            sentinel[pos] = True
        else:
            values[pos] = float(token)
    return ScalarField(grid, values, sentinel=sentinel if sentinel.any() else None)


def write_trace_csv(path: Path, trace: EvolutionTrace) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,M,F_c,wt_sup\n")
        for k in range(trace.times.size):
            fields = (trace.times[k], trace.max_drift[k], trace.lyapunov[k], trace.wt_sup[k])
            fh.write(",".join("nan" if math.isnan(v) else _fmt(v) for v in fields) + "\n")


# ---------------------------------------------------------------------------
# report serialization


def _condition_report_dict(report: ConditionReport) -> dict:
    witness = None
    if report.gcondition is not None:
        w = report.gcondition
        witness = {
            "level": w.level,
            "integral": w.integral,
            "perimeter": w.perimeter,
            "margin": w.margin,
            "measure": w.mask.measure(),
        }
    out = {
        "stats": {
            "mean": report.stats.mean,
            "min": report.stats.min,
            "max": report.stats.max,
            "oscillation": report.stats.oscillation,
            "grad_sup": report.stats.grad_sup,
        },
        "gcondition_witness": witness,
        "classical_branches": {
            "oscillation_small": report.classical.branch_oscillation_small,
            "positive_small_max": report.classical.branch_positive_small_max,
            "positive_large_max": report.classical.branch_positive_large_max,
            "one_dimensional": report.classical.branch_one_dimensional,
            "verdict": report.classical.verdict,
            "min": report.classical.min,
            "max": report.classical.max,
            "oscillation": report.classical.oscillation,
            "isoperimetric_constant": report.classical.c_n,
            "threshold": report.classical.threshold,
            "hypothesis_ok": report.classical.hypothesis_ok,
        },
        "ls_condition": {
            "holds": report.ls.holds,
            "theta": report.ls.theta,
            "margin": report.ls.margin,
            "sign_constant": report.ls.sign_constant,
        },
        "cls_condition": None,
        "stationary_condition": None,
    }
    if report.cls is not None:
        out["cls_condition"] = {
            "holds": report.cls.holds,
            "mean": report.cls.mean,
            "min": report.cls.min,
        }
    if report.stationary is not None:
        out["stationary_condition"] = {
            "plausible": report.stationary.plausible,
            "best_ratio": report.stationary.best_ratio,
            "best_level": report.stationary.best_level,
            "family_size": report.stationary.family_size,
        }
    return out


def _support_components_1d(wave: WaveSolution) -> list[list[float]]:
    inside = wave.support.inside
    grid = wave.support.grid
    h = grid.spacing
    if inside.all():
        return [[0.0, 1.0]]
    prev = np.roll(inside, 1)
    starts = list(np.nonzero(inside & ~prev)[0])
    comps = []
    n = grid.n
    for s in starts:
        length = 0
        while inside[(s + length) % n]:
            length += 1
        comps.append([s * h, ((s + length) % n) * h])
    return comps


def _wave_dict(wave: WaveSolution, sample: MuSample, tau: float, config: dict) -> dict:
    out = {
        "cbar": wave.cbar,
        "mu": sample.mu,
        "solver_gap": sample.solver_gap,
        "profile_residual": wave.profile_residual,
        "perimeter_gap": wave.perimeter_gap,
        "support_measure": wave.support.measure(),
        "support_perimeter": perimeter_indicator(wave.support),
        "tau": tau,
        "config": config,
    }
    if wave.support.grid.dimension == 1:
        out["support_components"] = _support_components_1d(wave)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_check(config: RunConfig, out: Path, quiet: bool) -> int:
    report = build_condition_report(config.forcing, config.grid())
    payload = _condition_report_dict(report)
    payload["verified"] = report.verified
    payload["config"] = config.raw
    write_json(out / "check.json", payload)
    if not quiet:
        verdict = "verified" if report.verified else "inconclusive"
        print(f"check: hypothesis {verdict}; report at {out / 'check.json'}")
    return EXIT_OK if report.verified else EXIT_INCONCLUSIVE


def cmd_speed(config: RunConfig, out: Path, quiet: bool) -> int:
    grid = config.grid()
    cbar, sample = wave_speed(config.forcing, grid, config.get("tol_c"), config.get("tol_obj"))
    write_json(
        out / "speed.json",
        {
            "cbar": cbar,
            "mu": sample.mu,
            "solver_gap": sample.solver_gap,
            "iterations": sample.iterations,
            "mean_g": config.forcing.mean,
            "max_g": float(config.forcing.sample(grid).values.max()),
            "tol_c": config.get("tol_c"),
            "config": config.raw,
        },
    )
    write_profile_csv(out / "minimizer.csv", sample.minimizer)
    if not quiet:
        print(f"speed: cbar = {cbar:.10g} (mu = {sample.mu:.3e}, gap = {sample.solver_gap:.2e})")
    return EXIT_OK


def _compute_wave(config: RunConfig, grid: PeriodicGrid) -> tuple[float, MuSample, WaveSolution]:
    cbar, sample = wave_speed(config.forcing, grid, config.get("tol_c"), config.get("tol_obj"))
    wave = extract_profile(sample, cbar, config.forcing, config.get("tau"))
    return cbar, sample, wave


def cmd_wave(config: RunConfig, out: Path, quiet: bool) -> int:
    grid = config.grid()
    cbar, sample, wave = _compute_wave(config, grid)
    payload = _wave_dict(wave, sample, config.get("tau"), config.raw)
    if grid.dimension == 1 and not wave.support.inside.all():
        zeros = support_boundary_zeros(wave, config.forcing)
        payload["boundary_zeros"] = {
            "vacuous": zeros.vacuous,
            "max_distance": zeros.max_distance,
            "endpoints": [[p, d] for p, d in zeros.endpoints],
            "zeros_of_g": zeros.zeros,
        }
    write_json(out / "wave.json", payload)
    write_profile_csv(out / "profile.csv", wave.profile)
    if not quiet:
        print(
            f"wave: cbar = {cbar:.10g}, support measure = {wave.support.measure():.6g}, "
            f"residual = {wave.profile_residual:.3e}"
        )
    return EXIT_OK


def _initial_datum(config: RunConfig, grid: PeriodicGrid) -> ScalarField:
    u0spec = config.params.get("u0")
    if u0spec is None:
        return constant_field(grid, 0.0)
    return u0spec.sample(grid)


def cmd_evolve(config: RunConfig, out: Path, quiet: bool) -> int:
    grid = config.grid()
    c = config.params.get("c", 0.0)
    if c == "auto":
        c, _ = wave_speed(config.forcing, grid, config.get("tol_c"), config.get("tol_obj"))
    params = EvolutionParams(
        speed_shift=float(c),
        final_time=config.get("T"),
        cfl_safety=config.get("sigma"),
        snapshot_stride=config.get("snapshot_stride", 0),
    )
    trace = evolve(_initial_datum(config, grid), config.forcing, params)
    write_trace_csv(out / "trace.csv", trace)
    write_profile_csv(out / "final.csv", trace.snapshots[-1])
    if config.params.get("write_snapshots", False):
        for k, snap in enumerate(trace.snapshots):
            write_profile_csv(out / "snapshots" / f"snap_{k:06d}.csv", snap)
    write_json(
        out / "evolve.json",
        {
            "c": float(c),
            "dt": trace.dt,
            "steps": int(round(trace.times[-1] / trace.dt)),
            "final_time": trace.times[-1],
            "M_final": trace.max_drift[-1],
            "config": config.raw,
        },
    )
    if not quiet:
        print(
            f"evolve: {trace.times.size} snapshots to t = {trace.times[-1]:.6g}, "
            f"M(T) = {trace.max_drift[-1]:.6g}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# crosscheck


def _flag(measured: float, tolerance: float, passed: Optional[bool] = None) -> dict:
    if passed is None:
        passed = bool(measured <= tolerance)
    return {"passed": bool(passed), "measured": measured, "tolerance": tolerance}


def _constant_matched_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(d.max() - d.min()) / 2.0


def _invariant_suite(config: RunConfig, grid: PeriodicGrid, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    forcing = config.forcing
    gfield = forcing.sample(grid)
    flags: dict[str, dict] = {}

    # operator adjointness on random fields
    worst = 0.0
    for _ in range(5):
        f = ScalarField(grid, rng.standard_normal(grid.shape))
        v_arrays = tuple(rng.standard_normal(grid.shape) for _ in range(grid.dimension))
        from .grid import VectorField

        v = VectorField(grid, v_arrays)
        div_v = divergence(v)
        grad_f = gradient(f)
        lhs = float((div_v.values * f.values).sum()) / grid.num_nodes
        rhs = -sum(
            float((vc * gc).sum()) for vc, gc in zip(v.components, grad_f.components)
        ) / grid.num_nodes
        scale = 1.0 + abs(lhs) + abs(rhs)
        worst = max(worst, abs(lhs - rhs) / scale)
    flags["adjointness"] = _flag(worst, 1e-12)

    # one-homogeneity of the transformed functional
    c_test = max(forcing.mean, 0.5)
    base = ScalarField(grid, np.abs(rng.standard_normal(grid.shape)))
    g0 = eval_Gc(base, gfield, c_test)
    worst = 0.0
    for k in (0.0, 0.5, 2.0, 10.0):
        scaled = ScalarField(grid, k * base.values)
        gk = eval_Gc(scaled, gfield, c_test)
        worst = max(worst, abs(gk - k * g0) / (1.0 + abs(k * g0)))
    flags["homogeneity"] = _flag(worst, 1e-12)

    # change of variables between the original and transformed functionals
    psi = ScalarField(grid, -np.abs(rng.standard_normal(grid.shape)))
    f_val = functional_Fc(psi, gfield, c_test)
    transformed = ScalarField(grid, np.exp(c_test * psi.values) / c_test)
    g_val = eval_Gc(transformed, gfield, c_test)
    rel = abs(f_val - g_val) / (1.0 + abs(g_val))
    flags["change_of_variables"] = _flag(rel, 1e-10)

    # vertical shift equivariance of the evolution
    u0 = ScalarField(grid, 0.01 * rng.standard_normal(grid.shape))
    shift = 0.75
    params = EvolutionParams(speed_shift=0.0, final_time=0.01, cfl_safety=0.4, snapshot_stride=0)
    t1 = evolve(u0, forcing, params)
    t2 = evolve(ScalarField(grid, u0.values + shift), forcing, params)
    diff = float(np.abs(t2.snapshots[-1].values - (t1.snapshots[-1].values + shift)).max())
    flags["shift_equivariance"] = _flag(diff, 1e-12)
    return flags


def cmd_crosscheck(config: RunConfig, out: Path, quiet: bool, skip_oracle: bool) -> int:
    grid = config.grid()
    forcing = config.forcing
    stages = config.params.get("stages", {})
    seed = config.get("seed")
    report: dict[str, Any] = {"config": config.raw, "artifacts": {}}
    flags: dict[str, dict] = {}

    condition = build_condition_report(forcing, grid)
    write_json(out / "check.json", _condition_report_dict(condition))
    report["artifacts"]["check"] = str(out / "check.json")
    if not condition.verified:
        write_json(out / "crosscheck.json", report)
        if not quiet:
            print("crosscheck: forcing hypothesis not verified; refusing")
        return EXIT_INCONCLUSIVE

    if grid.dimension != 1 and not skip_oracle:
        raise ConfigError(
            "the shooting oracle is one-dimensional; pass --skip-oracle for 2D configs"
        )

    # variational speed and wave
    cbar, sample, wave = _compute_wave(config, grid)
    gs = forcing.sample(grid).values
    report["cbar_variational"] = cbar
    tol_c = config.get("tol_c")
    in_bracket = forcing.mean - tol_c <= cbar <= float(gs.max()) + tol_c
    flags["speed_bracket"] = _flag(cbar, float(gs.max()) + tol_c, passed=in_bracket)
    write_json(out / "wave.json", _wave_dict(wave, sample, config.get("tau"), config.raw))
    write_profile_csv(out / "profile.csv", wave.profile)
    report["artifacts"]["wave"] = str(out / "wave.json")

    # shooting oracle
    report["c_oracle"] = None
    report["oracle_failure"] = None
    if not skip_oracle:
        try:
            oracle = solve_classical_wave_1d(
                forcing, grid, steps=config.params.get("oracle_steps")
            )
            report["c_oracle"] = oracle.c
            delta_c = abs(cbar - oracle.c)
            report["delta_c"] = delta_c
            flags["oracle_agreement"] = _flag(delta_c, 1e-2)
            if wave.support.inside.all():
                dist = _constant_matched_distance(wave.profile.values, oracle.profile.values)
                report["profile_sup_distance"] = dist
                flags["profile_agreement"] = _flag(dist, 2e-2)
            write_json(
                out / "oracle.json",
                {
                    "c": oracle.c,
                    "q0": oracle.q0,
                    "residual_periodicity": oracle.residual_periodicity,
                    "residual_mean_slope": oracle.residual_mean_slope,
                    "steps": oracle.steps,
                    "config": config.raw,
                },
            )
            write_profile_csv(out / "oracle_profile.csv", oracle.profile)
            report["artifacts"]["oracle"] = str(out / "oracle.json")
        except NoClassicalWaveError as exc:
            report["oracle_failure"] = {"reason": exc.reason, "message": str(exc)}
            write_json(out / "oracle.json", {"found": False, "reason": exc.reason, "config": config.raw})

    # evolution at the computed speed
    evolve_res = stages.get("evolve", {}).get("resolution", grid.n)
    if evolve_res != grid.n:
        egrid = make_grid(grid.dimension, evolve_res)
        ecbar, esample, ewave = _compute_wave(config, egrid)
    else:
        egrid, ecbar, ewave = grid, cbar, wave
    params = EvolutionParams(
        speed_shift=ecbar,
        final_time=config.get("T", 10.0),
        cfl_safety=config.get("sigma", 0.45),
        snapshot_stride=config.get("snapshot_stride", 0),
    )
    u0 = constant_field(egrid, 0.0)
    trace = evolve(u0, forcing, params)
    write_trace_csv(out / "trace.csv", trace)
    report["artifacts"]["trace"] = str(out / "trace.csv")

    inside = ewave.support.inside
    terminal = _constant_matched_distance(
        trace.snapshots[-1].values[inside], ewave.profile.values[inside]
    )
    report["evolution_terminal_distance"] = terminal
    if ewave.support.inside.all():
        flags["terminal_convergence"] = _flag(terminal, 5e-2)

    lyap = trace.lyapunov
    rises = np.diff(lyap)
    allowed = 1e-8 * (1.0 + np.abs(lyap[:-1]))
    worst_rise = float((rises - allowed).max())
    flags["lyapunov_nonincreasing"] = _flag(worst_rise, 0.0, passed=bool(worst_rise <= 0.0))
    flags["lyapunov_lower_bound"] = _flag(-float(lyap.min()), 1e-6)

    comparison = check_lower_bound(trace, ewave, u0)
    flags["comparison_lower_bound"] = _flag(
        comparison.m_worst_rate, comparison.slack_per_time, passed=comparison.m_nondecreasing
    )
    if comparison.mtilde_nonincreasing is not None:
        flags["comparison_upper_bound"] = _flag(
            comparison.mtilde_worst_rate, comparison.slack_per_time,
            passed=comparison.mtilde_nonincreasing,
        )

    log_report = check_log_bound(trace, ecbar)
    flags["log_bound_finite"] = _flag(
        log_report.sup_excess, math.inf, passed=bool(math.isfinite(log_report.sup_excess))
    )
    flags["log_lower_bound"] = _flag(-log_report.lower_margin, 1e-6)

    late = trace.times >= 1.0
    if late.any():
        wt_late = trace.wt_sup[late]
        ratio = float(wt_late.max() / max(wt_late[0], 1e-300))
        flags["wt_sup_bounded"] = _flag(ratio, 2.0)

    flags.update(_invariant_suite(config, grid, seed))

    report["flags"] = flags
    report["passed"] = bool(all(f["passed"] for f in flags.values()))
    write_json(out / "crosscheck.json", report)
    if not quiet:
        status = "PASS" if report["passed"] else "FAIL"
        print(f"crosscheck: {status}")
        for name in sorted(flags):
            f = flags[name]
            print(
                f"  {'ok ' if f['passed'] else 'BAD'} {name}: "
                f"measured {f['measured']:.3e} vs tolerance {f['tolerance']:.3e}"
            )
    return EXIT_OK if report["passed"] else EXIT_ERROR


# ---------------------------------------------------------------------------
# entry point


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fmcwaves",
        description="Traveling waves for forced mean curvature flow on the torus",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default="out", help="output directory for artifacts")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "crosscheck":
            p.add_argument("--skip-oracle", action="store_true", help="skip the shooting stage")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if config.command != args.cmd:
            raise ConfigError(
                f"config carries command section '{config.command}' "
                f"but '{args.cmd}' was invoked"
            )
        out = Path(args.out)
        if args.cmd == "check":
            return cmd_check(config, out, args.quiet)
        if args.cmd == "speed":
            return cmd_speed(config, out, args.quiet)
        if args.cmd == "wave":
            return cmd_wave(config, out, args.quiet)
        if args.cmd == "evolve":
            return cmd_evolve(config, out, args.quiet)
        return cmd_crosscheck(config, out, args.quiet, args.skip_oracle)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except HypothesisNotVerifiedError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (
        InfeasibleForcingError,
        BracketFailureError,
        SolverStallError,
        EmptySupportError,
        NoClassicalWaveError,
        BlowUpError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
