"""Command-line driver: simulate, detect, blow up and classify.

Every stage reads and writes plain files in the output directory, so a
pipeline can be stopped, inspected and resumed stage by stage::

    mcflab pipeline --config run.ini --output out/
    mcflab simulate --output out/ && mcflab density --output out/

Configuration is an INI file with the sections listed in ``SCHEMA``; an
unknown section or key is an error. Exit codes: 0 success, 1 usage or
configuration error, 2 numerical failure, 3 stage failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import blowup, classify, flow, meshes, monotonicity, oracle
from .flow import FlowConfig, FlowTrajectory, TRACE_COLUMNS
from .geometry import DegenerateGeometryError
from .immersion import DiscreteImmersion, NDOFFError, load_immersion, save_immersion

STAGES = ("simulate", "density", "blowup", "classify", "normalize", "embeddedness")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_STAGE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    pass


def _floats(text: str):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _stages(text: str):
    out = tuple(s.strip() for s in text.replace(",", " ").split())
    bad = [s for s in out if s not in STAGES]
    if bad:
        raise ValueError(f"unknown stage(s) {bad}; choose from {list(STAGES)}")
    if not out:
        raise ValueError("pipeline is empty")
    return out


_FLOW_PARSE = {
    "dt_safety": float, "stop_curvature": float, "t_max": float, "integrator": str,
    "record_every": int, "pinching_c": _opt_float, "pinching_a": float,
    "monitor_embeddedness": _bool, "axisymmetric": _bool, "track_gradients": _bool,
    "max_steps": int, "tangential_sweeps": int,
}
assert set(_FLOW_PARSE) == {f.name for f in fields(FlowConfig)}

SCHEMA = {
    "input": {
        "source": str, "path": str, "oracle": str, "n": int, "N": int, "radius0": float,
        "m": int, "cylinder_length": _opt_float, "multiplicity": int, "t0": float,
        "resolution": int, "shape": str, "axes": _floats, "gap": float,
        "noise": float,
    },
    "flow": _FLOW_PARSE,
    "pipeline": {"stages": _stages, "output_dir": str, "seed": int},
    "density": {"slack": float},
    "blowup": {"kind": str, "num_scales": int, "s": _floats, "window": float,
               "first_scale": int, "radius": float},
    "classify": {"fit_center": _bool, "residual": float, "ratio_spread": float,
                 "grad_h": float, "ratio_match": float, "density_match": float,
                 "core_weight": float},
    "normalize": {"t_max": float, "dt_safety": float, "record_every": int},
}


@dataclass
class ExperimentConfig:
    """Everything a run needs; sections mirror the INI file."""

    input: Dict[str, object] = field(default_factory=lambda: {
        "source": "oracle", "oracle": "Sphere", "n": 1, "N": 2, "radius0": 1.0, "m": 0,
        "cylinder_length": None, "multiplicity": 1, "t0": 0.0, "resolution": None,
        "shape": "ellipse", "axes": (2.0, 1.0), "gap": 0.1, "noise": 0.0, "path": None})
    flow: Dict[str, object] = field(default_factory=dict)
    stages: tuple = ("simulate", "density", "classify")
    output_dir: Optional[str] = None
    seed: int = 0
    density: Dict[str, object] = field(default_factory=lambda: {"slack": 1e-3})
    blowup: Dict[str, object] = field(default_factory=lambda: {
        "kind": "auto", "num_scales": 8, "s": (-0.5,), "window": 0.5, "first_scale": 1,
        "radius": 3.0})
    classify: Dict[str, object] = field(default_factory=lambda: {"fit_center": False})
    normalize: Dict[str, object] = field(default_factory=lambda: {
        "t_max": 2.0, "dt_safety": 0.02, "record_every": 10})

    def flow_config(self) -> FlowConfig:
        return FlowConfig(**self.flow)

    def thresholds(self) -> classify.Thresholds:
        kw = {k: v for k, v in self.classify.items() if k != "fit_center"}
        return classify.Thresholds(**kw)


def read_config(path) -> ExperimentConfig:
    """Parse an INI file against ``SCHEMA``."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    cfg = ExperimentConfig()
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{p}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{p}: unknown key '{key}' in [{section}]")
            try:
                value = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{p}: [{section}] {key}: {exc}") from exc
            if section == "pipeline":
                setattr(cfg, key, value)
            else:
                getattr(cfg, section)[key] = value
    try:
        cfg.flow_config()
        cfg.thresholds()
    except ValueError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return cfg


# -- input ----------------------------------------------------------------------

def _resolution(inp, default):
    r = inp.get("resolution")
    return default if r is None else int(r)


def build_input(cfg: ExperimentConfig):
    """Initial immersion, or an (x, r) profile for axisymmetric runs."""
    inp = cfg.input
    src = inp["source"]
    if src == "file":
        path = inp.get("path")
        if not path or not Path(path).is_file():
            raise ConfigError(f"input file not found: {path}")
        imm = load_immersion(path)
    elif src == "oracle":
        spec = oracle.ExactSolutionSpec(
            inp["oracle"], inp["n"], inp["N"], radius0=inp["radius0"],
            resolution=_resolution(inp, 256 if inp["n"] == 1 else 80), m=inp["m"],
            cylinder_length=inp["cylinder_length"], multiplicity=inp["multiplicity"])
        imm = oracle.make_exact(spec, inp["t0"])
    elif src == "shape":
        shape = inp["shape"]
        axes = inp["axes"]
        if shape == "ellipse":
            imm = meshes.ellipse(axes[0], axes[1], _resolution(inp, 256))
        elif shape == "ellipsoid":
            level = oracle.icosphere_level(_resolution(inp, 80))
            imm = meshes.ellipsoid(axes, level, max(3, inp["N"]))
        elif shape == "peanut":
            imm = meshes.peanut(_resolution(inp, 256), inp["gap"])
        elif shape == "figure_eight":
            imm = meshes.figure_eight(_resolution(inp, 256))
        elif shape == "dumbbell":
            x, r = meshes.dumbbell_profile(points=_resolution(inp, 401))
            return np.stack([x, r], 1)
        else:
            raise ConfigError(f"unknown shape '{shape}'")
    else:
        raise ConfigError(f"unknown input source '{src}' (oracle, shape or file)")
    if inp["noise"] > 0:
        rng = np.random.default_rng(cfg.seed)
        X = imm.positions
        scale = np.linalg.norm(X - X.mean(0), axis=1).mean()
        imm = imm.with_positions(X + inp["noise"] * scale * rng.standard_normal(X.shape))
    return imm


# -- file helpers -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read_csv(path: Path):
    if not path.is_file():
        raise StageError(f"missing input file {path}")
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if len(rows) < 2:
        raise StageError(f"{path} has no data rows")
    return rows[0], rows[1:]


def _write_record(path: Path, items):
    with open(path, "w", newline="\n") as f:
        for k, v in items:
            if isinstance(v, (list, tuple, np.ndarray)):
                v = " ".join(_fmt(x) for x in v)
            f.write(f"{k} = {_fmt(v)}\n")


def _read_record(path: Path) -> Dict[str, str]:
    if not path.is_file():
        raise StageError(f"missing input file {path}")
    out = {}
    with open(path) as f:
        for line in f:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


class Manifest:
    """Run manifest: one line per output file with its stage and parameters."""

    def __init__(self, out: Path):
        self.path = out / "manifest.txt"
        self.entries: List[tuple] = []
        if self.path.is_file():
            with open(self.path) as f:
                for line in f:
                    if line.startswith("#") or not line.strip():
                        continue
                    parts = line.rstrip("\n").split("\t")
                    self.entries.append(tuple(parts + [""] * (3 - len(parts)))[:3])

    def start(self, stage: str):
        self.entries = [e for e in self.entries if e[0] != stage]

    def add(self, stage: str, path: Path, params: str = ""):
        rel = os.path.relpath(path, self.path.parent)
        self.entries.append((stage, rel, params))

    def write(self, status: str = "ok", failed: Optional[str] = None):
        with open(self.path, "w", newline="\n") as f:
            f.write(f"# status = {status}\n")
            if failed:
                f.write(f"# failed_stage = {failed}\n")
            for e in self.entries:
                f.write("\t".join(e) + "\n")


# -- trajectory files ----------------------------------------------------------------

def _save_trajectory(traj: FlowTrajectory, out: Path, man: Manifest, stage: str, params: str):
    _write_csv(out / "trace.csv", TRACE_COLUMNS,
               zip(*[traj.trace[c] for c in TRACE_COLUMNS]))
    man.add(stage, out / "trace.csv", params)
    sdir = out / "states"
    sdir.mkdir(exist_ok=True)
    rows = []
    axisym = traj.profiles is not None
    for k, step in enumerate(traj.state_steps):
        t = traj.times[k]
        name = f"state_{int(step)}.ndoff"
        prof = ""
        if axisym:
            _, x, r = traj.profiles[k]
            prof = f"profile_{int(step)}.csv"
            _write_csv(sdir / prof, ("x", "r"), zip(x, r))
            man.add(stage, sdir / prof)
        if k < len(traj.states):
            save_immersion(traj.states[k][1], sdir / name)
            man.add(stage, sdir / name)
        else:
            name = ""
        rows.append((int(step), t, name, prof))
    _write_csv(out / "states.csv", ("step", "t", "state", "profile"), rows)
    man.add(stage, out / "states.csv")
    ev = [(e["kind"], e["t"], e["x"], e["r"]) for e in traj.events]
    _write_csv(out / "events.csv", ("kind", "t", "x", "r"), ev)
    man.add(stage, out / "events.csv")
    _write_record(out / "simulate.txt", [
        ("steps", len(traj.trace["t"])), ("final_time", traj.final_time),
        ("stored_states", len(traj.state_steps)), ("error", traj.error or "none"),
        ("profile_dim", traj.profile_dim or 0), ("ring", traj.ring)])
    man.add(stage, out / "simulate.txt")


def load_trajectory(out: Path, cfg: FlowConfig) -> FlowTrajectory:
    """Rebuild a trajectory from the files written by the simulate stage."""
    header, rows = _read_csv(out / "trace.csv")
    data = np.array([[float(v) for v in r] for r in rows])
    trace = {c: data[:, header.index(c)] for c in TRACE_COLUMNS}
    _, srows = _read_csv(out / "states.csv")
    meta = _read_record(out / "simulate.txt")
    sdir = out / "states"
    steps = np.array([int(r[0]) for r in srows], np.int64)
    profiles = None
    if srows[0][3]:
        profiles = []
        for r in srows:
            _, prow = _read_csv(sdir / r[3])
            P = np.array([[float(v) for v in p] for p in prow])
            profiles.append((float(r[1]), P[:, 0], P[:, 1]))
        from .axisym import RevolvedStates
        ring = int(meta.get("ring", 64))
        states = RevolvedStates(profiles, ring) if srows[0][2] else []
        return FlowTrajectory(states, trace, cfg, steps, events=[], profiles=profiles,
                              profile_dim=int(meta["profile_dim"]), ring=ring)
    states = [(float(r[1]), load_immersion(sdir / r[2])) for r in srows]
    err = meta.get("error", "none")
    return FlowTrajectory(states, trace, cfg, steps, error=None if err == "none" else err)


# -- stages --------------------------------------------------------------------------

def stage_simulate(cfg: ExperimentConfig, out: Path, man: Manifest):
    fc = cfg.flow_config()
    start = build_input(cfg)
    if fc.axisymmetric:
        if not isinstance(start, np.ndarray):
            raise ConfigError("axisymmetric runs need a profile input (shape = dumbbell)")
        traj = flow.axisymmetric_run(start, 2, fc)
    else:
        if isinstance(start, np.ndarray):
            raise ConfigError("profile inputs need [flow] axisymmetric = true")
        traj = flow.run(start, fc)
    _save_trajectory(traj, out, man, "simulate", f"dt_safety={fc.dt_safety} "
                     f"stop_curvature={fc.stop_curvature} seed={cfg.seed}")
    if traj.error:
        print(f"simulate: run ended early: {traj.error}", file=sys.stderr)


def _report(cfg: ExperimentConfig, traj: FlowTrajectory) -> flow.SingularityReport:
    try:
        return flow.estimate_singular_time(traj, window=cfg.blowup["window"])
    except flow.InsufficientDataError as exc:
        raise StageError(f"singular time: {exc}") from exc


def _save_report(rep: flow.SingularityReport, out: Path, man: Manifest, stage: str,
                 window: float):
    _write_record(out / "singularity.txt", [
        ("T_hat", rep.T_hat), ("fit_residual", rep.fit_residual),
        ("type", rep.type_verdict.value), ("C0_hat", rep.C0_hat),
        ("singular_vertex", rep.singular_vertex), ("q_hat", rep.q_hat),
        ("delta_hat", rep.delta_hat)])
    man.add(stage, out / "singularity.txt", f"window={window}")


def stage_density(cfg: ExperimentConfig, out: Path, man: Manifest):
    traj = load_trajectory(out, cfg.flow_config())
    rep = _report(cfg, traj)
    _save_report(rep, out, man, "density", cfg.blowup["window"])
    dt = monotonicity.density_trace(traj, rep.q_hat, rep.T_hat, slack=cfg.density["slack"])
    _write_csv(out / "density.csv", ("t", "theta"), dt.samples)
    man.add("density", out / "density.csv", f"horizon={_fmt(rep.T_hat)}")
    _write_record(out / "density_meta.txt", [
        ("center", dt.center), ("horizon", dt.horizon), ("theta_limit", dt.theta_limit),
        ("extrapolation_residual", dt.extrapolation_residual),
        ("violations", len(dt.violations)), ("slack", dt.slack)])
    man.add("density", out / "density_meta.txt")


def stage_blowup(cfg: ExperimentConfig, out: Path, man: Manifest):
    traj = load_trajectory(out, cfg.flow_config())
    b = cfg.blowup
    rep = _report(cfg, traj)
    _save_report(rep, out, man, "blowup", cfg.blowup["window"])
    kind = b["kind"]
    if kind == "auto":
        kind = "type1" if rep.type_verdict is flow.TypeVerdict.TYPE_I and traj.profiles is None \
            else "type2"
    try:
        if kind == "type1":
            seq = blowup.make_rescaled_sequence(traj, rep, b["num_scales"], b["s"],
                                                b["first_scale"])
        elif kind == "type2":
            seq = blowup.make_type2_sequence(traj, min(b["num_scales"], 4))
        else:
            raise ConfigError(f"unknown blow-up kind '{kind}' (auto, type1, type2)")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise StageError(f"blow-up: {exc}") from exc
    bdir = out / "blowup"
    bdir.mkdir(exist_ok=True)
    rows = []
    for k, row in enumerate(seq.snapshots):
        for j, (s, imm) in enumerate(row):
            name = f"snap_k{k}_s{j}.ndoff"
            save_immersion(imm, bdir / name)
            man.add("blowup", bdir / name)
            res = seq.shrinker_residuals[k][j] if seq.shrinker_residuals[k] else math.nan
            rows.append((k, s, seq.times[k], seq.scales[k], res,
                         seq.curvature_bound_check[k][j], name))
    _write_csv(out / "blowup.csv",
               ("k", "s", "t_k", "scale", "residual", "curvature_bound_check", "file"), rows)
    man.add("blowup", out / "blowup.csv", f"kind={kind} num_scales={b['num_scales']}")
    s_last = seq.snapshots[0][0][0]
    stab = (blowup.stabilization_profile(seq, s_last, b["radius"])
            if len(seq.snapshots) > 1 else [])
    _write_record(out / "blowup_meta.txt", [
        ("kind", kind), ("center_kind", seq.center_kind.value), ("s", s_last),
        ("stabilization", stab if stab else "none")])
    man.add("blowup", out / "blowup_meta.txt")


def _classification_target(cfg: ExperimentConfig, out: Path):
    """Snapshot to classify, its backward time and whether to fit the centre."""
    if (out / "blowup.csv").is_file():
        _, rows = _read_csv(out / "blowup.csv")
        k, s, *_, name = rows[-1]
        s = float(s)
        imm = load_immersion(out / "blowup" / name)
        if s == 0.0:  # curvature-maximum snapshot: centre and time are fitted
            return imm, -0.5, True
        return imm, s, bool(cfg.classify.get("fit_center", False))
    if (out / "trace.csv").is_file():
        traj = load_trajectory(out, cfg.flow_config())
        rep = _report(cfg, traj)
        t, last = traj.states[-1]
        if not t < rep.T_hat:
            raise StageError("last stored state is past the estimated singular time")
        lam = 1.0 / math.sqrt(2.0 * (rep.T_hat - t))
        return last.transformed(lam, rep.q_hat), -0.5, bool(cfg.classify.get("fit_center", False))
    start = build_input(cfg)
    if isinstance(start, np.ndarray):
        raise StageError("nothing to classify: run simulate first")
    return start, -0.5, bool(cfg.classify.get("fit_center", False))


def stage_classify(cfg: ExperimentConfig, out: Path, man: Manifest):
    imm, s, fit = _classification_target(cfg, out)
    table = classify.build_density_table(imm.intrinsic_dim)
    c = classify.classify_shrinker(imm, table, s=s, fit_center=fit, thresholds=cfg.thresholds())
    header = ("verdict", "label", "multiplicity", "m", "shrinker_residual", "ratio_mean",
              "ratio_spread", "grad_h_norm", "density_measured", "density_expected",
              "pinching_satisfied", "pinching_filter", "s", "reason")
    row = (c.verdict, c.label, c.multiplicity if c.multiplicity is not None else "",
           c.m if c.m is not None else "", c.shrinker_residual, c.ratio_mean, c.ratio_spread,
           c.grad_h_norm, c.density_measured, c.density_expected, c.pinching_satisfied,
           classify.pinching_filter(c, imm.intrinsic_dim), c.s, c.reason)
    _write_csv(out / "classification.csv", header, [row])
    man.add("classify", out / "classification.csv", f"fit_center={fit}")
    print(f"classification: {c.label} (density {c.density_measured:.4f}, "
          f"ratio {c.ratio_mean:.4f}, residual {c.shrinker_residual:.3g})")


def stage_normalize(cfg: ExperimentConfig, out: Path, man: Manifest):
    start = build_input(cfg)
    if isinstance(start, np.ndarray):
        raise ConfigError("the normalized flow needs a mesh input")
    nz = cfg.normalize
    fc = FlowConfig(**{**cfg.flow, "t_max": nz["t_max"], "dt_safety": nz["dt_safety"],
                       "record_every": nz["record_every"], "stop_curvature": math.inf})
    traj = flow.normalized_run(start, fc)
    cols = TRACE_COLUMNS + ("t_unnormalized",)
    data = [traj.trace[c] for c in TRACE_COLUMNS] + [traj.unnormalized_t]
    _write_csv(out / "normalized_trace.csv", cols, zip(*data))
    man.add("normalize", out / "normalized_trace.csv", f"t_max={nz['t_max']}")
    slope, r2 = decay_fit(traj.trace["t"], traj.trace["max_traceless_sq"],
                          traj.trace["max_grad_h_sq"])
    _write_record(out / "decay.txt", [("slope", slope), ("delta", -slope), ("r_squared", r2),
                                      ("error", traj.error or "none")])
    man.add("normalize", out / "decay.txt")


def decay_fit(t, traceless_sq, grad_h_sq):
    """Slope and R^2 of log(max|h_0|^2 + max|grad h|^2) against t over the trailing half."""
    y = np.log(np.asarray(traceless_sq) + np.asarray(grad_h_sq))
    t = np.asarray(t)
    ok = np.isfinite(y)
    t, y = t[ok], y[ok]
    if len(t) < 3:
        return math.nan, math.nan
    m = t >= t[0] + 0.5 * (t[-1] - t[0])
    A = np.stack([np.ones(m.sum()), t[m]], 1)
    coef, *_ = np.linalg.lstsq(A, y[m], rcond=None)
    r = y[m] - A @ coef
    ss = np.sum((y[m] - y[m].mean()) ** 2)
    return float(coef[1]), float(1.0 - r @ r / ss) if ss > 0 else math.nan


def stage_embeddedness(cfg: ExperimentConfig, out: Path, man: Manifest):
    traj = load_trajectory(out, cfg.flow_config())
    if not len(traj.states):
        raise StageError("no stored meshes to monitor")
    rows = []
    for (t, imm), step in zip(traj.states, traj.state_steps):
        rows.append((int(step), t, flow.embeddedness_gap(imm)))
    _write_csv(out / "embeddedness.csv", ("step", "t", "embed_gap"), rows)
    man.add("embeddedness", out / "embeddedness.csv")


STAGE_FUNCS = {
    "simulate": stage_simulate,
    "density": stage_density,
    "blowup": stage_blowup,
    "classify": stage_classify,
    "normalize": stage_normalize,
    "embeddedness": stage_embeddedness,
}


def write_table(n: int, resolution: Optional[int], out: Path, man: Manifest):
    table = classify.build_density_table(n, resolution)
    _write_csv(out / f"density_table_n{n}.csv", ("label", "n", "m", "density", "quadrature"),
               [(e.label, e.n, e.m, e.density, e.quadrature) for e in table.entries])
    man.add("table", out / f"density_table_n{n}.csv", f"resolution={table.resolution}")


def run_pipeline(cfg: ExperimentConfig, stages=None) -> int:
    """Run stages in order; returns the exit code and always writes the manifest."""
    if not cfg.output_dir:
        raise ConfigError("no output directory (set [pipeline] output_dir or --output)")
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    man = Manifest(out)
    for stage in (cfg.stages if stages is None else stages):
        man.start(stage)
        try:
            STAGE_FUNCS[stage](cfg, out, man)
        except ConfigError:
            man.write("failed", stage)
            raise
        except (DegenerateGeometryError, flow.FlowError) as exc:
            man.write("failed", stage)
            print(f"{stage}: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        except (StageError, NDOFFError, ValueError) as exc:
            man.write("failed", stage)
            print(f"{stage}: {exc}", file=sys.stderr)
            return EXIT_STAGE
        man.write()
    return EXIT_OK


# -- plots -------------------------------------------------------------------------

def emit_plots(out: Path, man: Optional[Manifest] = None) -> List[Path]:
    """SVG line plots of the traces present in ``out``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "mcflab"
    pdir = out / "plots"
    pdir.mkdir(exist_ok=True)
    written = []

    def columns(path):
        header, rows = _read_csv(path)
        try:
            data = np.array([[float(v) if v else math.nan for v in r] for r in rows])
        except ValueError as exc:
            raise StageError(f"malformed CSV {path}: {exc}") from exc
        return {h: data[:, i] for i, h in enumerate(header)}

    def save(x, y, xlabel, ylabel, name, logy=False):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ok = np.isfinite(y)
        if logy:
            ok &= y > 0
        if ok.any():
            ax.plot(x[ok], y[ok], lw=1.2)
            if logy:
                ax.set_yscale("log")
        else:
            ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        fig.savefig(pdir / name, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(pdir / name)

    if (out / "density.csv").is_file():
        d = columns(out / "density.csv")
        save(d["t"], d["theta"], "t", "heat density theta", "theta.svg")
    if (out / "trace.csv").is_file():
        tr = columns(out / "trace.csv")
        if (out / "singularity.txt").is_file():
            T = float(_read_record(out / "singularity.txt")["T_hat"])
            m = tr["t"] < T
            save(tr["t"][m], 2.0 * (T - tr["t"][m]) * tr["max_h_sq"][m], "t",
                 "2 (T - t) max|h|^2", "blowup_rate.svg")
        save(tr["t"], tr["pinching_gap"], "t", "pinching gap", "pinching_gap.svg")
    if (out / "normalized_trace.csv").is_file():
        nz = columns(out / "normalized_trace.csv")
        save(nz["t"], nz["max_traceless_sq"], "normalized time", "max |h_0|^2",
             "traceless_decay.svg", logy=True)
    elif (out / "trace.csv").is_file():
        save(tr["t"], tr["max_traceless_sq"], "t", "max |h_0|^2", "traceless_decay.svg",
             logy=True)
    if not written:
        raise StageError(f"no trace files in {out}")
    if man is not None:
        for p in written:
            man.add("plot", p)
    return written


# -- entry point ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment configuration")
    common.add_argument("--output", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="seed for randomized input meshes")
    common.add_argument("--resolution", type=int, help="input mesh resolution")
    p = _Parser(prog="mcflab", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("pipeline", parents=[common], help="run the configured stages in order")
    t = sub.add_parser("table", parents=[common], help="write the shrinker density table")
    t.add_argument("--dim", type=int, default=2, choices=(1, 2), help="intrinsic dimension n")
    sub.add_parser("plot", parents=[common], help="SVG plots of the traces in the output directory")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = read_config(args.config) if args.config else ExperimentConfig()
        if args.output:
            cfg.output_dir = args.output
        if args.seed is not None:
            cfg.seed = args.seed
        if args.resolution is not None:
            cfg.input["resolution"] = args.resolution
        if args.command in STAGES:
            return run_pipeline(cfg, [args.command])
        if args.command == "pipeline":
            return run_pipeline(cfg)
        if not cfg.output_dir:
            raise ConfigError("no output directory (set [pipeline] output_dir or --output)")
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        man = Manifest(out)
        if args.command == "table":
            man.start("table")
            write_table(args.dim, args.resolution, out, man)
        else:
            man.start("plot")
            try:
                emit_plots(out, man)
            except StageError as exc:
                man.write("failed", "plot")
                print(f"plot: {exc}", file=sys.stderr)
                return EXIT_STAGE
        man.write()
        return EXIT_OK
    except ConfigError as exc:
        print(f"mcflab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
