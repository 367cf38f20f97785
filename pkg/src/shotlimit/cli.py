"""Batch front end.

Usage::

    shotlimit --config run.ini [--command verify] [--seed 7] [--workers 2] [--out DIR]

The config is an INI file with sections [model], [response], [experiment]
and [output]; see README.md for every key. Flags override the file and the
environment variable SHOTLIMIT_OUTPUT_DIR overrides output.output_dir (but
not --out).

Artifacts are CSV (one ``# schema_version=N`` line, then a header row) and a
``run.json`` manifest echoing the resolved config. The worker count is an
execution budget and is left out of every artifact, so outputs are
byte-identical for any number of workers.

Exit status: 0 when the artifacts were written and all verdicts pass, 1 when
a verdict fails, 2 on any error. Errors print one line to stderr,
``error reason=<tag>: <message>``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .counting import MODELS, ModelSpec, normalization_for
from .errors import ConfigError, ShotLimitError
from .fracint import FracIntSpec, holder_estimate, integrate_values, limit_cov, rl_convolution_identity_check
from .gauss_paths import Driver, GaussianPath, TimeGrid, sample_paths
from .laws import Law
from .response import FAMILIES, ResponseFn
from .shotnoise import centering
from .verify import DEFAULT_PROBES, ExperimentSpec, convergence_sweep, run_experiment, simulate_probes

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "verify", "sweep", "holder", "cov", "identity")
ENV_OUTPUT = "SHOTLIMIT_OUTPUT_DIR"
DEFAULT_OUTPUT = "shotlimit_out"

KEYS = {
    "model": {"model", "increment", "delay", "perturbation", "d", "k", "c", "w"},
    "response": {"beta", "family", "param", "prefix"},
    "experiment": {
        "command", "scale_t", "scales", "u_points", "n_paths", "seed", "workers",
        "grid_points", "driver", "rho", "grid_m", "grid_ms", "k", "beta",
    },
    "output": {"output_dir"},
}


@dataclass
class RunConfig:
    command: str
    seed: int
    workers: int = 1
    output_dir: str = DEFAULT_OUTPUT
    experiment: object = None
    params: dict = field(default_factory=dict)

    def echo(self):
        """Resolved config, as written to run.json (workers deliberately omitted)."""
        out = {"command": self.command, "seed": self.seed}
        if isinstance(self.experiment, ExperimentSpec):
            out["experiment"] = self.experiment.describe()
        out.update({k: v for k, v in self.params.items() if not k.startswith("_")})
        return out


# -- parsing -------------------------------------------------------------------


def _num(sec, key, kind=float, default=None, required=False):
    path = f"{sec.name}.{key}"
    if key not in sec:
        if required:
            raise ConfigError(path, "missing required field")
        return default
    raw = sec[key].strip()
    try:
        if kind is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        val = float(raw)
    except ValueError:
        raise ConfigError(path, f"not a number: {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigError(path, f"must be finite, got {raw!r}")
    return val


def _floats(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return tuple(float(x) for x in sec[key].replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{sec.name}.{key}", f"not a list of numbers: {sec[key]!r}") from None


def _law(sec, key, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"{sec.name}.{key}", "missing required field")
        return None
    try:
        return Law.parse(sec[key].strip())
    except ShotLimitError as e:
        raise ConfigError(f"{sec.name}.{key}", str(e)) from None


def _section(cp, name):
    if not cp.has_section(name):
        cp.add_section(name)
    return cp[name]


def parse_model(sec):
    name = sec.get("model", "").strip()
    if not name:
        raise ConfigError("model.model", "missing required field")
    if name not in MODELS:
        raise ConfigError("model.model", f"unknown model {name!r}; known: {', '.join(MODELS)}")
    kw = {}
    if name == "inhom_poisson":
        kw["c"] = _num(sec, "c", required=True)
        kw["w"] = _num(sec, "w", required=True)
        for key in ("c", "w"):
            if kw[key] <= 0:
                raise ConfigError(f"model.{key}", f"must be > 0, got {kw[key]}")
    else:
        kw["increment"] = _law(sec, "increment", required=True)
        if name == "random_walk" and "delay" in sec:
            kw["delay"] = _law(sec, "delay")
        if name == "perturbed_walk":
            kw["perturbation"] = _law(sec, "perturbation", required=True)
        if name == "long_memory_walk":
            kw["d"] = _num(sec, "d", required=True)
            if not 0 < kw["d"] < 0.5:
                raise ConfigError("model.d", f"needs 0 < d < 1/2, got {kw['d']}")
        if name == "branching":
            k = _num(sec, "k", required=True)
            if k != int(k) or k < 2:
                raise ConfigError("model.k", f"generation k must be an integer >= 2, got {k:g}")
            kw["k"] = int(k)
    try:
        return ModelSpec(name, **kw)
    except ShotLimitError as e:
        raise ConfigError("model", str(e)) from None


def parse_response(sec):
    beta = _num(sec, "beta", required=True)
    if beta < 0:
        raise ConfigError("response.beta", f"must be >= 0, got {beta:g}")
    family = sec.get("family", "const").strip()
    if family not in FAMILIES:
        raise ConfigError("response.family", f"unknown family {family!r}; known: {', '.join(FAMILIES)}")
    param = _num(sec, "param", default=1.0)
    prefix = ()
    if "prefix" in sec:
        try:
            prefix = tuple(tuple(float(x) for x in knot.split(":")) for knot in sec["prefix"].split(","))
        except ValueError:
            raise ConfigError("response.prefix", "expected knots 't:v, t:v, ...'") from None
        if any(len(k) != 2 for k in prefix):
            raise ConfigError("response.prefix", "expected knots 't:v, t:v, ...'")
    try:
        return ResponseFn(beta, family, param, prefix)
    except ShotLimitError as e:
        raise ConfigError("response", str(e)) from None


def _driver(sec):
    try:
        return Driver.parse(sec.get("driver", "bm").strip())
    except ShotLimitError as e:
        raise ConfigError("experiment.driver", str(e)) from None


def parse_config(text):
    """RunConfig from INI text; raises ConfigError naming the offending key."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError("config", f"malformed file: {e}") from None
    for name in cp.sections():
        if name not in KEYS:
            raise ConfigError(name, "unknown section")
        for key in cp[name]:
            if key not in KEYS[name]:
                raise ConfigError(f"{name}.{key}", "unknown key")
    ex = _section(cp, "experiment")
    command = ex.get("command", "").strip()
    if not command:
        raise ConfigError("experiment.command", "missing required field")
    if command not in COMMANDS:
        raise ConfigError("experiment.command", f"unknown command {command!r}; known: {', '.join(COMMANDS)}")
    seed = _num(ex, "seed", int, required=True)
    if seed < 0:
        raise ConfigError("experiment.seed", "must be >= 0")
    workers = _num(ex, "workers", int, default=1)
    if workers < 1:
        raise ConfigError("experiment.workers", "must be >= 1")
    out = _section(cp, "output").get("output_dir", DEFAULT_OUTPUT).strip()
    cfg = RunConfig(command, seed, workers, out)
    _parse_command(cfg, cp, ex)
    return cfg


def _probes(ex):
    u = _floats(ex, "u_points", DEFAULT_PROBES)
    if not u or min(u) <= 0:
        raise ConfigError("experiment.u_points", "probe points must be > 0")
    return u


def _parse_command(cfg, cp, ex):
    cmd, p = cfg.command, cfg.params
    if cmd in ("simulate", "verify", "sweep"):
        if not cp.has_section("model"):
            raise ConfigError("model", "missing required section")
        if not cp.has_section("response"):
            raise ConfigError("response", "missing required section")
        model = parse_model(cp["model"])
        h = parse_response(cp["response"])
        n_paths = _num(ex, "n_paths", int, default=5000)
        u = _probes(ex)
        if cmd == "sweep":
            scales = _floats(ex, "scales")
            if scales is None:
                raise ConfigError("experiment.scales", "missing required field")
            if len(scales) < 3 or any(b <= a for a, b in zip(scales, scales[1:])):
                raise ConfigError("experiment.scales", "need at least three increasing scales")
            p["scales"] = list(scales)
            scale_t = scales[0]
        else:
            scale_t = _num(ex, "scale_t", required=True)
        if cmd == "simulate":
            grid_points = _num(ex, "grid_points", int, default=101)
            if grid_points < 2:
                raise ConfigError("experiment.grid_points", "must be >= 2")
            p["grid_points"] = grid_points
        try:
            cfg.experiment = ExperimentSpec(model, h, scale_t, u, n_paths, cfg.seed)
        except ShotLimitError as e:
            key = "experiment.n_paths" if "n_paths" in str(e) else "experiment"
            raise ConfigError(key, str(e)) from None
        return
    if cmd == "holder":
        p["driver"] = _driver(ex).label
        p["rho"] = list(_floats(ex, "rho", (0.0,)))
        p["grid_m"] = _num(ex, "grid_m", int, default=14)
        p["n_paths"] = _num(ex, "n_paths", int, default=100)
        if p["grid_m"] < 8:
            raise ConfigError("experiment.grid_m", "must be >= 8")
        if p["n_paths"] < 1:
            raise ConfigError("experiment.n_paths", "must be >= 1")
        alpha = Driver.parse(p["driver"]).holder_index
        for r in p["rho"]:
            if r <= -alpha:
                raise ConfigError("experiment.rho", f"rho={r:g} must exceed -alpha={-alpha:g}")
    elif cmd == "cov":
        p["driver"] = _driver(ex).label
        beta = _num(ex, "beta", default=None)
        if beta is None and cp.has_section("response"):
            beta = _num(cp["response"], "beta", default=None)
        if beta is None:
            raise ConfigError("experiment.beta", "missing required field")
        if beta < 0:
            raise ConfigError("experiment.beta", f"must be >= 0, got {beta:g}")
        p["beta"] = beta
        p["u_points"] = list(_probes(ex))
    elif cmd == "identity":
        k = _num(ex, "k", default=2.0)
        if k != int(k) or k < 2:
            raise ConfigError("experiment.k", f"must be an integer >= 2, got {k:g}")
        beta = _num(ex, "beta", default=0.5)
        if beta <= 0:
            raise ConfigError("experiment.beta", f"must be > 0, got {beta:g}")
        ms = _floats(ex, "grid_ms", (12.0, 13.0, 14.0))
        if any(m != int(m) or m < 2 for m in ms):
            raise ConfigError("experiment.grid_ms", "grid exponents must be integers >= 2")
        p.update(k=int(k), beta=beta, grid_ms=[int(m) for m in ms])


# -- artifacts -------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows, meta=None):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, **doc}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_to_json(report, path):
    write_json(path, report.to_dict())


def report_to_csv(report, path):
    write_csv(path, ["u_i", "u_j", "empirical", "theoretical", "se"], report.rows())


# -- commands --------------------------------------------------------------------


def _cmd_simulate(cfg, out):
    spec = cfg.experiment
    t = spec.scale_t
    u = np.linspace(0.0, max(spec.u_points), cfg.params["grid_points"])
    grid_spec = ExperimentSpec(spec.model, spec.h, t, tuple(u[1:]), spec.n_paths, spec.seed)
    X = simulate_probes(grid_spec, cfg.workers)
    norm = normalization_for(spec.model)
    scale = float(norm.a(t) * spec.h(t))
    cent = np.array([centering(spec.h, norm.b, t * x) for x in u[1:]])
    Z = (X - cent) / scale

    def rows():
        for i in range(X.shape[0]):
            yield (i, 0.0, 0.0, 0.0)
            for j in range(u.size - 1):
                yield (i, u[j + 1], X[i, j], Z[i, j])

    write_csv(out / "paths.csv", ["path", "u", "shot_noise", "normalized"], rows(),
              meta={"scale_t": _fmt(t), "normalization": _fmt(scale)})
    return ["paths.csv"], {}


def _cmd_verify(cfg, out):
    rep = run_experiment(cfg.experiment, cfg.workers)
    report_to_json(rep, out / "report.json")
    report_to_csv(rep, out / "cov.csv")
    return ["report.json", "cov.csv"], dict(rep.verdicts)


def _cmd_sweep(cfg, out):
    res = convergence_sweep(cfg.experiment, cfg.params["scales"], cfg.workers)
    write_csv(out / "sweep.csv", ["scale_t", "max_abs_deviation", "max_se"],
              zip(res.scales, res.deviations, res.noise))
    return ["sweep.csv"], {"nonincreasing": res.nonincreasing}


def _cmd_holder(cfg, out):
    p = cfg.params
    driver = Driver.parse(p["driver"])
    grid = TimeGrid.dyadic(p["grid_m"])
    W = sample_paths(driver, grid, cfg.seed, p["n_paths"])
    rows = []
    for rho in p["rho"]:
        Y = integrate_values(W, grid.step, FracIntSpec(rho)) if rho else W
        est = np.array([holder_estimate(y) for y in Y])
        target = min(1.0, driver.holder_index + rho)
        rows.append((driver.label, rho, p["n_paths"], est.mean(), est.std(ddof=1) if est.size > 1 else 0.0, target))
    write_csv(out / "holder.csv", ["driver", "rho", "n_paths", "mean_estimate", "sd_estimate", "target"], rows)
    return ["holder.csv"], {}


def _cmd_cov(cfg, out):
    p = cfg.params
    driver = Driver.parse(p["driver"])
    u = p["u_points"]
    rows = [(a, b, limit_cov(driver, p["beta"], a, b)) for i, a in enumerate(u) for b in u[i:]]
    write_csv(out / "cov.csv", ["u_i", "u_j", "cov"], rows, meta={"driver": driver.label, "beta": _fmt(p["beta"])})
    return ["cov.csv"], {}


def _cmd_identity(cfg, out):
    p = cfg.params
    ms = sorted(p["grid_ms"])
    fine = TimeGrid.dyadic(ms[-1])
    W = sample_paths(Driver("bm"), fine, cfg.seed, 1)[0]
    coarse_u = TimeGrid.dyadic(ms[0]).values
    rows, prev = [], None
    for m in ms:
        grid = TimeGrid.dyadic(m)
        sub = GaussianPath(grid, W[:: 2 ** (ms[-1] - m)], Driver("bm"))
        dev = rl_convolution_identity_check(sub, p["k"], p["beta"], u_grid=coarse_u)
        rows.append((m, grid.n_points, dev, prev / dev if prev else float("nan")))
        prev = dev
    write_csv(out / "identity.csv", ["grid_m", "n_points", "deviation", "ratio_to_previous"], rows,
              meta={"k": p["k"], "beta": _fmt(p["beta"])})
    return ["identity.csv"], {}


HANDLERS = {
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
    "holder": _cmd_holder,
    "cov": _cmd_cov,
    "identity": _cmd_identity,
}


def prepare_output(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e.strerror or e}") from None
    if not os.access(out, os.W_OK | os.X_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def execute(cfg):
    """Run ``cfg``; returns (exit status, verdicts)."""
    out = prepare_output(cfg.output_dir)
    artifacts, verdicts = HANDLERS[cfg.command](cfg, out)
    passed = all(verdicts.values())
    write_json(out / "run.json", {"config": cfg.echo(), "artifacts": artifacts,
                                  "verdicts": verdicts, "passed": passed})
    return (0 if passed else 1), verdicts


def build_parser():
    ap = argparse.ArgumentParser(prog="shotlimit", description="Shot-noise limit theorem experiments")
    ap.add_argument("--config", required=True, help="INI file with [model], [response], [experiment], [output]")
    ap.add_argument("--command", choices=COMMANDS, help="overrides experiment.command")
    ap.add_argument("--seed", type=int, help="overrides experiment.seed")
    ap.add_argument("--workers", type=int, help="overrides experiment.workers")
    ap.add_argument("--out", help="overrides output.output_dir and $" + ENV_OUTPUT)
    return ap


def _apply_overrides(text, args):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError("config", f"malformed file: {e}") from None
    ex = _section(cp, "experiment")
    for key in ("command", "seed", "workers"):
        val = getattr(args, key)
        if val is not None:
            ex[key] = str(val)
    out_dir = args.out or os.environ.get(ENV_OUTPUT)
    if out_dir:
        _section(cp, "output")["output_dir"] = out_dir
    lines = []
    for name in cp.sections():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in cp[name].items())
    return "\n".join(lines) + "\n"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise OSError(f"cannot read config {args.config}: {e.strerror or e}") from None
        cfg = parse_config(_apply_overrides(text, args))
        status, verdicts = execute(cfg)
    except ShotLimitError as e:
        print(f"error reason={e.reason}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error reason=io: {e}", file=sys.stderr)
        return 2
    failed = [k for k, v in verdicts.items() if not v]
    if failed:
        print(f"fail reason=verdict: {', '.join(failed)}", file=sys.stderr)
    else:
        print(f"ok command={cfg.command} out={cfg.output_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
