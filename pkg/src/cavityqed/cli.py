"""Command-line front end.

    cavityqed <experiment> --config <path> [--seed N] [--out DIR] [--n-traj N] [--quiet]

The config is INI text. Keys live in sections (``[params]`` then
``kappa = 0.05``) or are written dotted before the first section
(``params.kappa = 0.05``); both resolve to ``params.kappa``. Every run writes
``<experiment>.json`` with the resolved config, the seed and the results, a
``<experiment>_summary.txt`` and the experiment's CSV files. Nothing in the
output depends on the wall clock, so identical inputs give identical bytes.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import re
import sys
import warnings
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .linalg import PureState, basis, superpose
from .models import (
    CavityGeometry,
    RampSpec,
    RegimeError,
    SystemParams,
    build_telegraph_system,
    cooperativity,
    coupling_g,
    kappa_from_finesse,
    kappa_from_q,
    q_from_finesse,
    scattering_count,
    singlet_state,
    telegraph_timescales,
)
from .protocols import rus, source, telegraph, zeno
from .trajectory import TrajectoryError, derive_seed, no_click_fidelity_from_ensemble, run_ensemble, steady_state

OUT_ENV = "CAVITYQED_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
ROOT = "__root__"
NOCLICK_STREAM = 4

EXPERIMENTS = ("cavity-calc", "scatter", "source", "zeno-gate", "zeno-sweep", "telegraph", "rus-gate")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text: str) -> int:
    return int(text)


def _str(text: str) -> str:
    return text.strip()


def _float_list(text: str) -> list[float]:
    return [_float(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _grid(text: str) -> list[float]:
    """``lo:hi:n`` for n evenly spaced points, or a comma list."""
    if ":" in text:
        lo, hi, n = text.split(":")
        n = int(n)
        if n < 1:
            raise ValueError("grid needs at least one point")
        return [float(x) for x in np.linspace(_float(lo), _float(hi), n)]
    vals = _float_list(text)
    if not vals:
        raise ValueError("grid must be non-empty")
    return vals


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False


PARAM_FIELDS = ("g", "kappa", "gamma", "omega", "delta", "omega_m", "omega_l", "eta")


def _param_keys() -> dict[str, Key]:
    keys = {f"params.{k}": Key(_float) for k in PARAM_FIELDS}
    keys["params.n_max"] = Key(_int)
    return keys


COMMON = {"run.seed": Key(_int, 0)}

SCHEMAS: dict[str, dict[str, Key]] = {
    "cavity-calc": {
        "cavity.length": Key(_float, required=True),
        "cavity.wavelength": Key(_float, required=True),
        "cavity.reflectivity": Key(_float),
        "cavity.finesse": Key(_float),
        "cavity.mode_volume": Key(_float),
        "cavity.dipole": Key(_float),
        "cavity.frequency": Key(_float),
        "atom.gamma": Key(_float),
    },
    "scatter": {
        "scatter.snr": Key(_float, 10.0),
        "scatter.eta": Key(_float_list, [1.0, 0.1, 0.01]),
        "scatter.cooperativity": Key(_float_list, [10.0, 100.0]),
    },
    "source": {
        **_param_keys(),
        "pulse.duration": Key(_float, 50.0),
        "pulse.omega_max": Key(_float, 2.0),
        "pulse.shape": Key(_str, "sin2"),
        "run.t_end": Key(_float),
        "run.dt": Key(_float, 0.5),
    },
    "zeno-gate": {
        **_param_keys(),
        "gate.inputs": Key(_str_list, ["01", "bell00+11"]),
        "gate.method": Key(_str, "expm"),
        "gate.branching": Key(_float, 0.5),
    },
    "zeno-sweep": {
        **_param_keys(),
        "grid.omega": Key(_grid, [float(x) for x in np.linspace(0.02, 0.3, 15)]),
        "grid.delta": Key(_grid, [float(x) for x in np.linspace(0.25, 3.0, 12)]),
        "gate.inputs": Key(_str_list, ["01", "bell00+11"]),
        "gate.branching": Key(_float, 0.5),
    },
    "telegraph": {
        **_param_keys(),
        "run.n_traj": Key(_int, 10),
        "run.t_end": Key(_float),
        "run.dt": Key(_float, 1.0),
        "run.workers": Key(_int, 1),
        "telegraph.threshold": Key(_float),
        "telegraph.eta": Key(_float, 1.0),
        "telegraph.snapshot_interval": Key(_float),
        "noclick.windows": Key(_float_list, []),
        "noclick.etas": Key(_float_list, [1.0, 0.1]),
        "noclick.n_traj": Key(_int, 2000),
        "noclick.t_obs": Key(_float),
    },
    "rus-gate": {
        "rus.input": Key(_str, "plusplus"),
        "rus.basis": Key(_str, "default"),
        "rus.loss_prob": Key(_float, 0.0),
        "rus.dark_count_prob": Key(_float, 0.0),
        "rus.max_attempts": Key(_int, 1),
        "run.n_runs": Key(_int, 1000),
    },
}


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _key_lines(text: str) -> dict[str, int]:
    """Flattened key -> 1-based line number, for diagnostics."""
    lines, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        if line[:1].isspace() and section is not None and not line.strip().startswith(("#", ";")):
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            continue
        m = _KEY.match(line)
        if m:
            key = m.group(1).strip().lower()
            lines.setdefault(key if section is None else f"{section}.{key}", n)
    return lines


def read_config(path: str | os.PathLike) -> tuple[dict[str, str], dict[str, int]]:
    """Parse the INI file into flat ``section.key -> raw text``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    first = next((i for i, ln in enumerate(text.splitlines()) if _SECTION.match(ln)), None)
    has_root = any(_KEY.match(ln) for ln in text.splitlines()[:first])
    offset = 0
    if has_root:
        text_in, offset = f"[{ROOT}]\n{text}", 1
    else:
        text_in = text
    try:
        parser.read_string(text_in)
    except configparser.ParsingError as exc:
        line, _ = exc.errors[0]
        raise ConfigError("malformed line", line - offset) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", (exc.lineno or 0) - offset or None) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section {exc.section!r}", (exc.lineno or 0) - offset or None) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    flat = {}
    for sec in parser.sections():
        for key, val in parser.items(sec):
            name = key if sec == ROOT else f"{sec}.{key}"
            if name in flat:
                raise ConfigError(f"key {name!r} given twice")
            flat[name] = val
    return flat, _key_lines(text)


def resolve(experiment: str, raw: dict[str, str], lines: dict[str, int]) -> dict[str, Any]:
    """Check keys against the experiment schema and convert values."""
    schema = {**COMMON, **SCHEMAS[experiment]}
    for name in raw:
        if name not in schema:
            raise ConfigError(f"unknown key {name!r} for experiment {experiment}", lines.get(name))
    cfg = {}
    for name, key in schema.items():
        if name in raw:
            try:
                cfg[name] = key.parse(raw[name])
            except ValueError as exc:
                raise ConfigError(f"bad value for {name!r}: {exc}", lines.get(name)) from None
        elif key.required:
            raise ConfigError(f"missing required key {name!r}")
        else:
            cfg[name] = key.default
    return cfg


def _params(cfg: dict[str, Any], base: SystemParams) -> SystemParams:
    changes = {k: cfg[f"params.{k}"] for k in (*PARAM_FIELDS, "n_max") if cfg.get(f"params.{k}") is not None}
    return base.replace(**changes)


def _resolved_params(cfg: dict[str, Any], p: SystemParams) -> None:
    for k in (*PARAM_FIELDS, "n_max"):
        cfg[f"params.{k}"] = getattr(p, k)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    """CSV cell text; floats use the shortest repr that round-trips exactly."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header: list[str], rows, units: list[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    if units is not None:
        w.writerow(units)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


@dataclass
class Output:
    results: dict[str, Any]
    files: dict[str, str]
    summary: list[str]


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _qubit_input(label: str) -> PureState:
    s = 1 / math.sqrt(2)
    states = {
        "00": basis((2, 2), 0, 0),
        "01": basis((2, 2), 0, 1),
        "10": basis((2, 2), 1, 0),
        "11": basis((2, 2), 1, 1),
        "bell00+11": superpose((s, basis((2, 2), 0, 0)), (s, basis((2, 2), 1, 1))),
        "plusplus": PureState((2, 2), np.full(4, 0.5)),
    }
    if label not in states:
        raise ConfigError(f"unknown input state {label!r}; choose from {', '.join(states)}")
    return states[label]


def run_cavity_calc(cfg: dict[str, Any]) -> Output:
    try:
        geom = CavityGeometry(
            length=cfg["cavity.length"],
            wavelength=cfg["cavity.wavelength"],
            reflectivity=cfg["cavity.reflectivity"],
            finesse=cfg["cavity.finesse"],
            mode_volume=cfg["cavity.mode_volume"],
            dipole=cfg["cavity.dipole"],
            frequency=cfg["cavity.frequency"],
        )
        if geom.reflectivity is None and geom.finesse is None:
            raise ConfigError("cavity-calc needs cavity.reflectivity or cavity.finesse")
        f = geom.resolved_finesse
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    kappa = kappa_from_finesse(geom.length, f)
    q = q_from_finesse(geom.length, f, geom.wavelength)
    kappa_q = kappa_from_q(q, geom.wavelength)
    g = coupling_g(geom) if geom.mode_volume is not None and geom.dipole is not None else None
    gamma = cfg["atom.gamma"]
    c = cooperativity(g, kappa, gamma) if g is not None and gamma is not None else None
    header = [
        "reflectivity",
        "finesse",
        "length",
        "wavelength",
        "kappa",
        "q_factor",
        "kappa_from_q",
        "g",
        "gamma",
        "cooperativity",
    ]
    units = ["1", "1", "m", "m", "1/s", "1", "1/s", "rad/s", "1/s", "1"]
    row = [geom.reflectivity, f, geom.length, geom.wavelength, kappa, q, kappa_q, g, gamma, c]
    results = dict(zip(header, row))
    summary = [f"finesse = {f:.6g}", f"kappa = {kappa:.6g} 1/s", f"Q = {q:.6g}"]
    if g is not None:
        summary.append(f"g = {g:.6g} rad/s")
    if c is not None:
        summary.append(f"C = {c:.6g}")
    return Output(results, {"cavity_calc.csv": _csv_text(header, [row], units)}, summary)


def run_scatter(cfg: dict[str, Any]) -> Output:
    s = cfg["scatter.snr"]
    rows = []
    try:
        for c in cfg["scatter.cooperativity"]:
            for eta in cfg["scatter.eta"]:
                rows.append([s, eta, c, scattering_count(s, eta, c)])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    header = ["snr", "eta", "cooperativity", "scattering_count"]
    summary = [f"M({r[0]:g}, eta={r[1]:g}, C={r[2]:g}) = {r[3]:.6g}" for r in rows]
    results = {"rows": [dict(zip(header, r)) for r in rows]}
    return Output(results, {"scatter.csv": _csv_text(header, rows)}, summary)


def run_source(cfg: dict[str, Any]) -> Output:
    try:
        p = _params(cfg, SystemParams(g=1.0, kappa=0.05, gamma=0.08))
        pulse = RampSpec(cfg["pulse.duration"], cfg["pulse.omega_max"], cfg["pulse.shape"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _resolved_params(cfg, p)
    if cfg["run.t_end"] is None:
        cfg["run.t_end"] = pulse.duration + 20.0 / p.kappa
    out = source.photon_source_experiment(p, pulse, cfg["run.t_end"], cfg["run.dt"])
    results = {
        "emission_prob": out.emission_prob,
        "free_space_prob": out.free_space_prob,
        "residual": out.residual,
        "cooperativity": p.cooperativity,
    }
    files = {"source_waveform.csv": _csv_text(["time", "cavity_output_flux"], out.waveform)}
    summary = [
        f"C = {p.cooperativity:.6g}",
        f"cavity emission probability = {out.emission_prob:.6f}",
        f"free-space probability = {out.free_space_prob:.6f}",
        f"residual = {out.residual:.3e}",
    ]
    return Output(results, files, summary)


def _zeno_params(cfg) -> SystemParams:
    try:
        return _params(cfg, zeno.fig3_params())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_zeno_gate(cfg: dict[str, Any]) -> Output:
    p = _zeno_params(cfg)
    _resolved_params(cfg, p)
    inputs = {lab: _qubit_input(lab) for lab in cfg["gate.inputs"]}
    if cfg["gate.method"] not in ("expm", "rk4"):
        raise ConfigError(f"gate.method must be expm or rk4, got {cfg['gate.method']!r}")
    try:
        zeno.check_zeno_regime(p)
    except RegimeError as exc:
        raise ConfigError(str(exc)) from None
    header = ["input_label", "omega_over_g", "delta_over_g", "conditional_fidelity", "success_prob", "gate_time"]
    rows = []
    for lab, state in inputs.items():
        o = zeno.zeno_gate_experiment(p, state, lab, cfg["gate.branching"], cfg["gate.method"])
        rows.append([lab, p.omega / p.g, p.delta / p.g, o.conditional_fidelity, o.success_prob, o.gate_time])
    results = {"rows": [dict(zip(header, r)) for r in rows]}
    summary = [f"input {r[0]}: fidelity = {r[3]:.6f}, success = {r[4]:.6f}, T = {r[5]:.6g}/g" for r in rows]
    return Output(results, {"zeno_gate.csv": _csv_text(header, rows)}, summary)


def run_zeno_sweep(cfg: dict[str, Any]) -> Output:
    p = _zeno_params(cfg)
    _resolved_params(cfg, p)
    inputs = {lab: _qubit_input(lab) for lab in cfg["gate.inputs"]}
    for om in cfg["grid.omega"]:
        for de in cfg["grid.delta"]:
            if om == 0 or de == 0 or abs(om) >= 2 * abs(de):
                raise ConfigError(f"grid point omega={om:g}, delta={de:g} is outside the Zeno regime")
    res = zeno.sweep_gate(p, cfg["grid.omega"], cfg["grid.delta"], inputs, cfg["gate.branching"])
    header = ["omega_over_g", "delta_over_g", "input_label", "conditional_fidelity", "success_prob", "gate_time"]
    rows = [[r.omega / p.g, r.delta / p.g, r.input_label, r.conditional_fidelity, r.success_prob, r.gate_time] for r in res.rows]
    results = {"best_omega_over_g": res.best_omega / p.g, "best_delta_over_g": res.best_delta / p.g, "best_score": res.best_score}
    best = [r for r in res.rows if r.omega == res.best_omega and r.delta == res.best_delta]
    results["best"] = [
        {"input_label": r.input_label, "conditional_fidelity": r.conditional_fidelity, "success_prob": r.success_prob}
        for r in best
    ]
    summary = [
        f"optimum omega = {res.best_omega:.6g} g, delta = {res.best_delta:.6g} g (min over inputs of F*S = {res.best_score:.6f})"
    ]
    summary += [f"  {r.input_label}: fidelity = {r.conditional_fidelity:.6f}, success = {r.success_prob:.6f}" for r in best]
    return Output(results, {"zeno_sweep.csv": _csv_text(header, rows)}, summary)


def run_telegraph(cfg: dict[str, Any]) -> Output:
    try:
        p = _params(cfg, telegraph.c40_params())
        build_telegraph_system(p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _resolved_params(cfg, p)
    if cfg["run.t_end"] is None:
        if p.omega_l == 0:
            raise ConfigError("run.t_end is required when params.omega_l = 0")
        ts = telegraph_timescales(p)
        cfg["run.t_end"] = 40 * (ts.t_dark + ts.t_light)
    seed = cfg["run.seed"]
    ens, an = telegraph.telegraph_experiment(
        p,
        cfg["run.t_end"],
        cfg["run.n_traj"],
        seed,
        threshold=cfg["telegraph.threshold"],
        eta=cfg["telegraph.eta"],
        snapshot_interval=cfg["telegraph.snapshot_interval"],
        dt=cfg["run.dt"],
        workers=cfg["run.workers"],
    )
    cfg["telegraph.threshold"] = an.threshold_used
    clicks = [[i, r.time, r.channel, r.detected] for i, tr in enumerate(ens.trajectories) for r in tr.records]
    periods = [[i, per.kind, per.start, per.end] for i, pers in enumerate(an.periods) for per in pers]
    files = {
        "telegraph_clicks.csv": _csv_text(["trajectory_index", "time", "channel", "detected"], clicks),
        "telegraph_periods.csv": _csv_text(["trajectory_index", "kind", "start", "end"], periods),
    }
    results = {
        "t_cav_est": an.t_cav_est,
        "t_dark_est": an.t_dark_est,
        "t_light_est": an.t_light_est,
        "threshold_used": an.threshold_used,
        "n_light": an.n_light,
        "n_dark": an.n_dark,
        "low_confidence": an.low_confidence,
        "degenerate": an.degenerate,
        "dark_fidelity": an.dark_fidelity,
        "n_dark_samples": an.n_dark_samples,
    }
    summary = [
        f"{an.n_light} light and {an.n_dark} dark periods, threshold {an.threshold_used:.6g}/g",
        f"T_cav = {an.t_cav_est:.6g}, T_dark = {an.t_dark_est:.6g}, T_light = {an.t_light_est:.6g}",
    ]
    if an.t_cav_est > 0 and an.t_dark_est > 0:
        summary.append(
            f"T_dark/T_cav = {an.t_dark_est / an.t_cav_est:.4g}, T_light/T_dark = {an.t_light_est / an.t_dark_est:.4g}"
        )
    if an.dark_fidelity is not None:
        summary.append(f"singlet fidelity in long dark periods = {an.dark_fidelity:.6f} ({an.n_dark_samples} samples)")
    if an.low_confidence:
        summary.append("estimates are low-confidence (fewer than 10 periods of a kind)")
    windows = cfg["noclick.windows"]
    if windows:
        model = build_telegraph_system(p)
        t_obs = cfg["noclick.t_obs"] if cfg["noclick.t_obs"] is not None else max(windows)
        cfg["noclick.t_obs"] = t_obs
        nc_ens = run_ensemble(
            model,
            steady_state(model),
            cfg["noclick.n_traj"],
            t_obs,
            cfg["run.dt"],
            derive_seed(seed, 0, NOCLICK_STREAM),
            workers=cfg["run.workers"],
        )
        rows = []
        for eta in cfg["noclick.etas"]:
            for pt in no_click_fidelity_from_ensemble(nc_ens, eta, windows, singlet_state(), t_obs):
                rows.append([pt.window, eta, pt.fidelity, pt.n_selected])
        files["telegraph_noclick.csv"] = _csv_text(["window_t", "eta", "fidelity", "n_selected"], rows)
        results["noclick"] = [dict(zip(["window_t", "eta", "fidelity", "n_selected"], r)) for r in rows]
        for eta in cfg["noclick.etas"]:
            fids = [r[2] for r in rows if r[1] == eta and r[2] is not None]
            if fids:
                summary.append(f"best no-click fidelity at eta = {eta:g}: {max(fids):.6f}")
    return Output(results, files, summary)


def run_rus_gate(cfg: dict[str, Any]) -> Output:
    state = _qubit_input(cfg["rus.input"])
    bases = {"default": rus.default_basis, "deterministic": rus.deterministic_basis}
    if cfg["rus.basis"] not in bases:
        raise ConfigError(f"rus.basis must be one of {', '.join(bases)}")
    basis_states = bases[cfg["rus.basis"]]()
    for name in ("rus.loss_prob", "rus.dark_count_prob"):
        if not 0 <= cfg[name] <= 1:
            raise ConfigError(f"{name} must lie in [0, 1]")
    if cfg["rus.max_attempts"] < 1 or cfg["run.n_runs"] < 1:
        raise ConfigError("rus.max_attempts and run.n_runs must be at least 1")
    seed = cfg["run.seed"]
    header = ["run_index", "attempts_used", "success", "first_outcome", "last_outcome", "last_class", "false_herald"]
    rows = []
    counts = np.zeros(5, dtype=int)
    for i in range(cfg["run.n_runs"]):
        r = rus.rus_gate(
            state,
            cfg["rus.loss_prob"],
            cfg["rus.max_attempts"],
            derive_seed(seed, i),
            basis_states,
            cfg["rus.dark_count_prob"],
        )
        first, last = r.attempts[0], r.attempts[-1]
        counts[4 if first.outcome_index is None else first.outcome_index] += 1
        rows.append(
            [i, r.attempts_used, r.success, first.outcome_index, last.outcome_index, last.outcome_class, last.false_herald]
        )
    n = cfg["run.n_runs"]
    born = rus.outcome_weights(rus.rus_encode(state), basis_states)
    keep = (1 - cfg["rus.loss_prob"]) ** 2
    results = {
        "success_rate": float(np.mean([r[2] for r in rows])),
        "mean_attempts": float(np.mean([r[1] for r in rows])),
        "first_outcome_counts": [int(c) for c in counts[:4]],
        "first_outcome_lost": int(counts[4]),
        "expected_first_outcome_probs": [float(keep * b) for b in born],
        "outcome_classes": [rus.classify(b) for b in basis_states],
    }
    summary = [
        f"success rate = {results['success_rate']:.6f} over {n} runs",
        "first outcome frequencies: " + ", ".join(f"{c / n:.4f}" for c in counts[:4]) + f", lost {counts[4] / n:.4f}",
        "Born weights x survival:   " + ", ".join(f"{keep * b:.4f}" for b in born),
    ]
    return Output(results, {"rus_gate.csv": _csv_text(header, rows)}, summary)


RUNNERS = {
    "cavity-calc": run_cavity_calc,
    "scatter": run_scatter,
    "source": run_source,
    "zeno-gate": run_zeno_gate,
    "zeno-sweep": run_zeno_sweep,
    "telegraph": run_telegraph,
    "rus-gate": run_rus_gate,
}


def write_outputs(out_dir: Path, experiment: str, cfg: dict[str, Any], output: Output) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "experiment": experiment,
        "master_seed": cfg["run.seed"],
        "config": cfg,
        "results": output.results,
        "files": sorted(output.files),
    }
    text = json.dumps(_json_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
    written = []
    stem = experiment.replace("-", "_")
    files = {f"{stem}.json": text}
    cfg_lines = [f"  {k} = {fmt(v) if not isinstance(v, list) else ','.join(fmt(x) for x in v)}" for k, v in sorted(cfg.items())]
    files[f"{stem}_summary.txt"] = (
        "\n".join([f"experiment: {experiment}", f"master_seed: {cfg['run.seed']}", *output.summary, "config:", *cfg_lines]) + "\n"
    )
    files.update(output.files)
    for name, body in files.items():
        path = out_dir / name
        path.write_text(body)
        written.append(path)
    return written


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cavityqed", description="Cavity-QED entanglement protocol experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="INI config file")
    ap.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    ap.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./results)")
    ap.add_argument("--n-traj", type=int, help="number of trajectories (overrides run.n_traj)")
    ap.add_argument("--quiet", action="store_true", help="do not print the summary")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw, lines = read_config(args.config)
        cfg = resolve(args.experiment, raw, lines)
        if args.seed is not None:
            cfg["run.seed"] = args.seed
        if args.n_traj is not None:
            if "run.n_traj" not in cfg:
                raise ConfigError(f"--n-traj does not apply to {args.experiment}")
            if args.n_traj < 1:
                raise ConfigError("--n-traj must be at least 1")
            cfg["run.n_traj"] = args.n_traj
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            output = RUNNERS[args.experiment](cfg)
        if not args.quiet:
            for w in dict.fromkeys(str(w.message) for w in caught):
                print(f"warning: {w}", file=sys.stderr)
    except ConfigError as exc:
        where = f"{args.config}:{exc.line}" if exc.line else args.config
        print(f"{where}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrajectoryError as exc:
        print(f"numerical failure in trajectory {exc.index} (seed {exc.seed}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out_dir = Path(args.out or os.environ.get(OUT_ENV) or "results")
    written = write_outputs(out_dir, args.experiment, cfg, output)
    if not args.quiet:
        print("\n".join(output.summary))
        for path in written:
            print(f"wrote {path}")
    return EXIT_OK
