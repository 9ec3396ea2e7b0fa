"""Command-line front end: ``multimat <command> [flags]``.

Commands: bound, envelope, regimes, laminate, homogenize, topopt, attain. A JSON config
(``--config``) supplies defaults; flags override it. Exit codes: 0 success, 2 config
error, 1 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings

import jsonschema
import numpy as np

from . import bounds, cellfem, envelope, laminate, topopt
from .bounds import PhaseSet
from .tensor import StressTensor

COMMANDS = ("bound", "envelope", "regimes", "laminate", "homogenize", "topopt", "attain")

_NUM = {"type": "number"}
_KAPPA = {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"enum": ["inf", "Infinity"]}]}
_POSINT = {"type": "integer", "minimum": 1}


def _obj(props, **kw):
    return {"type": "object", "properties": props, "additionalProperties": False, **kw}


SCHEMA = _obj({
    "command": {"enum": list(COMMANDS)},
    "seed": {"type": "integer", "minimum": 0},
    "threads": _POSINT,
    "out": {"type": "string"},
    "phases": _obj({
        "kappa": {"type": "array", "items": _KAPPA, "minItems": 1, "maxItems": 3},
        "gamma": {"anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 3}]},
        "m": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
              "minItems": 1, "maxItems": 3},
    }),
    "load": _obj({
        "s": {"type": "number", "minimum": 0},
        "sigma": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
    }),
    "bound": _obj({"numeric": {"type": "boolean"}, "supports": {"type": "integer", "minimum": 1,
                                                                  "maximum": 4}}),
    "envelope": _obj({"s_max": {"type": "number", "exclusiveMinimum": 0}, "steps": _POSINT,
                      "grid_n": _POSINT}),
    "regimes": _obj({"lam_max": {"type": "number", "exclusiveMinimum": 0}, "steps": _POSINT}),
    "laminate": _obj({"label": {"enum": list(laminate.LABELS)}}),
    "homogenize": _obj({
        "kind": {"enum": ["laminate", "coated_circles", "image"]},
        "n": {"type": "integer", "minimum": 8},
        "label": {"enum": list(laminate.LABELS)},
        "m_core": {"type": "number", "minimum": 0, "maximum": 1},
        "core": {"type": "integer", "minimum": 0, "maximum": 2},
        "coat": {"type": "integer", "minimum": 0, "maximum": 2},
        "levels": {"type": "integer", "minimum": 1, "maximum": 2},
        "image": {"type": "string"},
        "solver": {"enum": ["direct", "cg"]},
    }),
    "topopt": _obj({
        "nx": {"type": "integer", "minimum": 2}, "ny": {"type": "integer", "minimum": 2},
        "length": {"type": "number", "exclusiveMinimum": 0},
        "height": {"type": "number", "exclusiveMinimum": 0},
        "contrast": {"enum": list(topopt.CONTRAST_PRESETS)},
        "force": _NUM, "cost_scale": {"type": "number", "minimum": 0},
        "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_iter": {"type": "integer", "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "fast_path": {"type": "boolean"},
        "mirrored": {"type": "boolean"},
    }),
    "attain": _obj({"n": {"type": "integer", "minimum": 8},
                    "m_coat": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "m_lam": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}),
})


class ConfigError(Exception):
    pass


def fmt(x):
    return format(float(x), ".17g")


def _floats(text, name):
    try:
        return [math.inf if t.strip().lower() in ("inf", "infinity") else float(t)
                for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _parser():
    p = argparse.ArgumentParser(prog="multimat", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config")
    p.add_argument("--kappa", help="comma-separated compliances, 'inf' for void")
    p.add_argument("--gamma", help="cost of the intermediate phase, or one cost per phase")
    p.add_argument("--m", help="volume fractions (the last one may be omitted)")
    p.add_argument("--s", type=float, help="isotropic load intensity")
    p.add_argument("--sigma", help="stress components sxx,syy,sxy")
    p.add_argument("--s-max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--label")
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    return p


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    validate(cfg, path)
    return cfg


def validate(cfg, source="config"):
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        msgs = []
        for e in errors:
            loc = "/".join(str(x) for x in e.absolute_path) or "<root>"
            msgs.append(f"{source}: at {loc}: {e.message}")
        raise ConfigError("\n".join(msgs))


def _merge(args):
    cfg = load_config(args.config) if args.config else {}
    if "command" in cfg and cfg["command"] != args.command:
        raise ConfigError(f"config command {cfg['command']!r} does not match {args.command!r}")
    ph = cfg.setdefault("phases", {})
    if args.kappa is not None:
        ph["kappa"] = _floats(args.kappa, "kappa")
    if args.gamma is not None:
        g = _floats(args.gamma, "gamma")
        ph["gamma"] = g[0] if len(g) == 1 else g
    if args.m is not None:
        ph["m"] = _floats(args.m, "m")
    load = cfg.setdefault("load", {})
    if args.s is not None:
        load["s"] = args.s
    if args.sigma is not None:
        load["sigma"] = _floats(args.sigma, "sigma")
    for key in ("seed", "threads", "out"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    block = cfg.setdefault(args.command, {})
    if args.s_max is not None:
        block["s_max"] = args.s_max
    if args.steps is not None:
        block["steps"] = args.steps
    if args.label is not None:
        block["label"] = args.label
    if args.n is not None:
        block["n"] = args.n
    kap = ph.get("kappa")
    if kap is not None:
        ph["kappa"] = [math.inf if k in ("inf", "Infinity") else k for k in kap]
    check = json.loads(json.dumps(cfg, allow_nan=True).replace("Infinity", '"inf"'))
    validate(check, "arguments")
    return cfg


def _phases(cfg, need=None):
    ph = cfg["phases"]
    if "kappa" not in ph:
        raise ConfigError("phases/kappa is required (--kappa)")
    kap = [float(k) for k in ph["kappa"]]
    if need is not None and len(kap) not in need:
        raise ConfigError(f"phases/kappa: expected {' or '.join(map(str, need))} values, got {len(kap)}")
    m = ph.get("m")
    if m is not None:
        m = [float(x) for x in m]
        if len(m) == len(kap) - 1:
            m.append(1.0 - sum(m))
        if len(m) != len(kap):
            raise ConfigError("phases/m: need one fraction per phase (the last may be omitted)")
    try:
        return PhaseSet.from_lists(kap, m)
    except ValueError as exc:
        raise ConfigError(f"phases: {exc}") from None


def _gamma(cfg, default=None):
    g = cfg["phases"].get("gamma", default)
    if g is None:
        raise ConfigError("phases/gamma is required (--gamma)")
    return g


def _sigma(cfg):
    load = cfg["load"]
    if "sigma" in load:
        return StressTensor(*(float(x) for x in load["sigma"]))
    if "s" in load:
        return StressTensor.isotropic(float(load["s"]) / math.sqrt(2.0))
    raise ConfigError("load: give s (--s) or sigma (--sigma)")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])


def _emit(cfg, header, rows, out=None):
    if cfg.get("out"):
        _write_csv(cfg["out"], header, rows)
    w = csv.writer(out or sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])


# -------------------------------------------------------------------------- commands


def cmd_bound(cfg):
    ps = _phases(cfg)
    if ps.fractions is None:
        raise ConfigError("phases/m is required (--m)")
    rows = [("wiener", bounds.wiener_bound(ps), ""), ("hs", bounds.hs_bound(ps), "")]
    kap = ps.kappas
    if len(kap) == 3 and math.isinf(kap[2]):
        val, branch = bounds.three_material_bound(kap[0], kap[1], ps.fractions[0], ps.fractions[1])
        rows.append(("three_material", val, branch))
    opts = cfg.get("bound", {})
    if opts.get("numeric"):
        tb = bounds.modified_translation_bound(ps, _sigma(cfg), opts.get("supports", 2),
                                               seed=cfg.get("seed", 0))
        rows.append(("modified_translation", tb.value, tb.region))
    _emit(cfg, ["quantity", "value", "branch"], rows)


def cmd_envelope(cfg):
    ps = _phases(cfg, need=(2, 3))
    k1, k2 = ps.kappas[:2]
    gamma = float(_gamma(cfg) if not isinstance(_gamma(cfg), list) else _gamma(cfg)[1])
    opts = cfg.get("envelope", {})
    s_max = float(opts.get("s_max", 1.5))
    steps = int(opts.get("steps", 300))
    ga, gb = envelope.gamma_interval(k1, k2)
    if not ga <= gamma <= gb:
        warnings.warn(f"gamma={gamma} lies outside [{ga:.6g}, {gb:.6g}]: the intermediate phase is "
                      "not used in three-phase composites, regime reported as degenerate")
    grid_n = int(opts.get("grid_n", 400))
    rows = []
    for s in np.linspace(0.0, s_max, steps + 1):
        p = envelope.envelope_eval(float(s), k1, k2, gamma, grid_n=grid_n)
        rows.append((float(s), p.regime, *map(float, p.m), float(p.value), float(p.strain),
                     float(p.kappa_eff)))
    header = ["s", "regime", "m1", "m2", "m3", "QF", "strain", "kappa_eff"]
    if cfg.get("out"):
        _write_csv(cfg["out"], header, rows)
        r = envelope.thresholds(k1, k2, gamma)
        print("thresholds " + " ".join(fmt(x) for x in r))
    else:
        _emit(cfg, header, rows)


def cmd_regimes(cfg):
    ps = _phases(cfg)
    gamma = _gamma(cfg)
    opts = cfg.get("regimes", {})
    lam_max = float(opts.get("lam_max", 1.5))
    steps = int(opts.get("steps", 12))
    vals = np.linspace(0.0, lam_max, steps + 1)
    labels = laminate.regime_map(ps, gamma, vals, vals, seed=cfg.get("seed", 0))
    rows = [(float(a), float(b), labels[i, j]) for i, a in enumerate(vals) for j, b in enumerate(vals)]
    out = cfg.get("out")
    if out:
        base = out[:-4] if out.endswith((".csv", ".ppm")) else out
        _write_csv(base + ".csv", ["lam1", "lam2", "label"], rows)
        # lam1 to the right, lam2 upwards
        topopt.write_ppm(topopt.regime_image(labels.T), base + ".ppm")
        print(f"wrote {base}.csv {base}.ppm")
    else:
        _emit(cfg, ["lam1", "lam2", "label"], rows)


def cmd_laminate(cfg):
    ps = _phases(cfg)
    sigma = _sigma(cfg)
    opts = cfg.get("laminate", {})
    seed = cfg.get("seed", 0)
    if ps.fractions is not None:
        label = opts.get("label")
        if label is None:
            raise ConfigError("laminate/label is required with fixed fractions (--label)")
        ch = laminate.optimize_at_fractions(label, ps, sigma, ps.fractions, seed=seed)
    else:
        labels = [opts["label"]] if "label" in opts else None
        ch = laminate.best_in_catalog(ps, sigma, _gamma(cfg), seed=seed, labels=labels)
    rows = [("label", ch.label), ("value", float(ch.value)), ("energy", float(ch.energy))]
    rows += [(f"m{i + 1}", float(x)) for i, x in enumerate(ch.fractions)]
    rows += [(f"p{i}", float(x)) for i, x in enumerate(ch.params)]
    _emit(cfg, ["quantity", "value"], rows)


def cmd_homogenize(cfg):
    ps = _phases(cfg)
    kap = tuple(ps.kappas)
    opts = cfg.get("homogenize", {})
    kind = opts.get("kind", "laminate")
    n = int(opts.get("n", 64))
    seed = cfg.get("seed", 0)
    if kind == "laminate":
        label = opts.get("label", "L(12,1)")
        if ps.fractions is None:
            raise ConfigError("phases/m is required for a laminate cell (--m)")
        ch = laminate.optimize_at_fractions(label, ps, _sigma(cfg) if cfg["load"] else
                                            StressTensor(1.0, 1.0, 0.0), ps.fractions, seed=seed)
        grid = cellfem.rasterize_laminate(ch.structure, kap, n)
    elif kind == "coated_circles":
        grid = cellfem.rasterize_coated_circles(opts.get("core", 2), opts.get("coat", 0),
                                                float(opts.get("m_core", 0.5)), n, kap,
                                                levels=opts.get("levels", 2))
    else:
        if "image" not in opts:
            raise ConfigError("homogenize/image: path of a PGM cell is required")
        grid = cellfem.load_pgm(opts["image"], kap)
    cmap = cellfem.homogenize(grid, solver=opts.get("solver", "direct"))
    K = cmap.compliance
    rows = [(f"K{i}{j}", float(K[i, j])) for i in range(3) for j in range(3)]
    rows.append(("kappa_iso", float(cellfem.isotropic_compliance(cmap))))
    rows += [(f"m{i + 1}", float(x)) for i, x in enumerate(grid.fractions())]
    _emit(cfg, ["quantity", "value"], rows)


def cmd_topopt(cfg):
    opts = dict(cfg.get("topopt", {}))
    contrast = opts.pop("contrast", None)
    kw = {k: v for k, v in opts.items()}
    kw["seed"] = cfg.get("seed", 0)
    ph = cfg["phases"]
    if contrast is not None:
        problem = topopt.DesignProblem.preset(contrast, **kw)
    else:
        if "kappa" in ph:
            kw["kappas"] = tuple(float(k) for k in ph["kappa"])
        if "gamma" in ph:
            g = ph["gamma"]
            kw["costs"] = tuple(g) if isinstance(g, list) else None
            if not isinstance(g, list):
                c = kw.get("cost_scale", topopt.DesignProblem.cost_scale)
                kw["costs"] = (c, c * g, 0.0)[: len(kw.get("kappas", (1, 2, math.inf)))]
        try:
            problem = topopt.DesignProblem(**kw)
        except (ValueError, topopt.TopoptError) as exc:
            raise ConfigError(f"topopt: {exc}") from None
    out = cfg.get("out", "design")
    design, history = topopt.solve_design(problem)
    files = topopt.export_design(design, out, history=history)
    base = files[0][:-4]
    b = topopt.baselines(problem)
    _write_csv(base + "_summary.csv", ["quantity", "value"],
               [("objective", float(design.objective)), ("iterations", design.info["iterations"]),
                ("converged", int(design.converged))] + [(f"baseline_{k}", float(v)) for k, v in b.items()])
    print("objective " + fmt(design.objective))
    print("wrote " + " ".join(files + [base + "_summary.csv"]))


def cmd_attain(cfg):
    opts = dict(cfg.get("attain", {}))
    ph = cfg["phases"]
    if "kappa" in ph:
        opts["kappa"] = [float(k) for k in ph["kappa"]][:2]
    rows = cellfem.attainability_report(opts)
    keys = ["structure", "bound", "catalog", "fem", "gap_bound_catalog", "gap_catalog_fem", "gap_bound_fem"]
    _emit(cfg, keys, [[r[k] for k in keys] for r in rows])


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}
NUMERIC_ERRORS = (bounds.BoundError, envelope.EnvelopeError, laminate.LaminateError,
                  cellfem.CellError, topopt.TopoptError, ArithmeticError, np.linalg.LinAlgError)


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = _merge(args)
        # all work here is serial; the flag is accepted so callers can cap workers uniformly
        cfg.get("threads", 1)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    return 0


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main():
    sys.exit(run())
