"""Command-line front end.

``parabsynth synth|portrait|verify|renorm --config FILE --out DIR``

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, MaxIter, NumericalError, ParabSynthError
from .flow import VectorFieldSpec, flow, model_field
from .germs import GERM_SCHEMA, Germ, ModulusData, germ_from_json
from .model import ModelParams

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4

_NUMBER_OR_AUTO = {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"enum": ["auto"]}]}
_COMPLEX = {"anyOf": [{"type": "number"},
                      {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_MODULUS = {
    "type": "object",
    "properties": {"mu": _COMPLEX, "phi0": GERM_SCHEMA, "phi_inf": GERM_SCHEMA},
    "additionalProperties": False,
}

SCHEMAS = {
    "synth": {
        "type": "object",
        "required": ["modulus"],
        "properties": {
            "modulus": _MODULUS,
            "lambda": _NUMBER_OR_AUTO,
            "fp_tol": {"type": "number", "exclusiveMinimum": 0},
            "max_iter": {"type": "integer", "minimum": 1},
            "n_nodes": {"type": "integer", "minimum": 16},
            "horn_samples": {"type": "integer", "minimum": 1},
        },
        "additionalProperties": False,
    },
    "portrait": {
        "type": "object",
        "required": ["field"],
        "properties": {
            "field": {"enum": ["X0", "Xf"]},
            "lambda": {"type": "number", "exclusiveMinimum": 0},
            "mu": _COMPLEX,
            "result": {"type": "string"},
            "grid": {"type": "integer", "minimum": 1, "maximum": 40},
            "time": {"type": "number", "exclusiveMinimum": 0},
            "separatrices": {"type": "boolean"},
        },
        "additionalProperties": False,
    },
    "verify": {
        "type": "object",
        "properties": {
            "suite": {"enum": ["model", "flow", "cauchyheine", "synthesis", "globalize", "renorm"]},
            "lambda": {"type": "number", "exclusiveMinimum": 0},
            "mu": _COMPLEX,
            "modulus": _MODULUS,
        },
        "additionalProperties": False,
    },
    "renorm": {
        "type": "object",
        "required": ["phi0"],
        "properties": {
            "phi0": GERM_SCHEMA,
            "mu": _COMPLEX,
            "lambda": _NUMBER_OR_AUTO,
            "tol": {"type": "number", "exclusiveMinimum": 0},
            "max_iter": {"type": "integer", "minimum": 1},
        },
        "additionalProperties": False,
    },
}


def _complex(v) -> complex:
    if v is None:
        return 0j
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def load_config(path: str | os.PathLike, command: str) -> dict:
    """Read and validate a JSON configuration for ``command``."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"configuration error at {where}: {exc.message}") from exc
    return cfg


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("PARABSYNTH_THREADS", "1")))
    except ValueError as exc:
        raise ConfigError("PARABSYNTH_THREADS must be an integer") from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _synthesize_from(cfg: dict, force: bool):
    from .model import synthesis_bounds
    from .synthesis import synthesize

    m = ModulusData.from_json(cfg["modulus"])
    lam = cfg.get("lambda", "auto")
    if lam == "auto":
        lam = synthesis_bounds(m).lambda_max / 2
    return synthesize(m, float(lam), cfg.get("fp_tol", 1e-10), cfg.get("max_iter", 200),
                      n_nodes=cfg.get("n_nodes", 400), allow_above_bound=force)


def cmd_synth(cfg: dict, out: Path, args) -> int:
    from .synthesis import fixed_point_residual, measure_horn_maps

    r = _synthesize_from(cfg, args.force)
    horn = measure_horn_maps(r, cfg.get("horn_samples", 50))
    report = r.to_json()
    report["lambda"] = r.params.lam
    report["f_norm"] = 0.0 if r.f_is_zero else r.diagnostics["sampled_f_norm"]
    report["fixed_point_residual"] = 0.0 if r.f_is_zero else fixed_point_residual(r)
    report["horn_maps"] = horn.to_json()
    _write_json(out / "synthesis.json", report)
    print(f"lambda={r.params.lam:.6g} iterations={r.diagnostics['iterations']} "
          f"f_norm={report['f_norm']:.3e} horn_residual={horn.max_psi_error:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# portrait
# ---------------------------------------------------------------------------

VIEW = 2.0
PIXELS = 800


def _px(z: complex) -> tuple[float, float]:
    return ((z.real + VIEW) / (2 * VIEW) * PIXELS, (VIEW - z.imag) / (2 * VIEW) * PIXELS)


def _polyline_svg(points, color: str, width: float) -> str:
    pts = [z for z in points if cmath_isfinite(z) and abs(z.real) <= 3 * VIEW and abs(z.imag) <= 3 * VIEW]
    if len(pts) < 2:
        return ""
    coords = " ".join("%.2f,%.2f" % _px(z) for z in pts)
    return f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"/>'


def cmath_isfinite(z) -> bool:
    return math.isfinite(z.real) and math.isfinite(z.imag)


def portrait_field(cfg: dict, force: bool) -> tuple[list[VectorFieldSpec], ModelParams]:
    """The fields to draw: ``X0`` or the two sectorial fields of a synthesized germ."""
    if cfg["field"] == "X0":
        p = ModelParams(cfg.get("lambda", 0.5), _complex(cfg.get("mu")))
        return [model_field(p)], p
    if "result" not in cfg:
        raise ConfigError("field 'Xf' needs 'result', the path of a synth output or config")
    with open(cfg["result"], encoding="utf-8") as fh:
        src = json.load(fh)
    synth_cfg = {"modulus": src["modulus"], "lambda": src.get("lambda", src.get("params", {}).get("lambda", "auto"))}
    r = _synthesize_from(synth_cfg, force)
    return [r.field("+"), r.field("-")], r.params


def _seed_grid(n: int, rng: np.random.Generator) -> np.ndarray:
    ticks = (np.arange(n) + 0.5) / n * 2 * VIEW - VIEW
    jitter = rng.uniform(-0.25, 0.25, size=(n, n, 2)) * (2 * VIEW / n)
    re = ticks[None, :] + jitter[..., 0]
    im = ticks[:, None] + jitter[..., 1]
    return (re + 1j * im).ravel()


def _trajectory(fields: list[VectorFieldSpec], z0: complex, t: float) -> list[tuple[float, complex]]:
    X = fields[0] if len(fields) == 1 or z0.real >= 0 else fields[1]
    back = flow(X, z0, -t, 1e-8, record=True)
    fwd = flow(X, z0, t, 1e-8, record=True)
    pts = [(s.real, z) for s, z in reversed(back.trajectory[1:])] + [(s.real, z) for s, z in fwd.trajectory]
    return [(s, z) for s, z in pts if cmath_isfinite(z)]


def cmd_portrait(cfg: dict, out: Path, args) -> int:
    from .globalize import trace_separatrices

    fields, p = portrait_field(cfg, args.force)
    rng = np.random.default_rng(args.seed)
    seeds = _seed_grid(cfg.get("grid", 12), rng)
    t = cfg.get("time", 4.0 / p.lam)
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        trajs = list(pool.map(lambda z: _trajectory(fields, complex(z), t), seeds))
    zeros = [(complex(z), k) for z, k in fields[0].zeros]
    poles = sorted({complex(q) for X in fields for q in X.poles}, key=lambda q: (q.real, q.imag))
    in_view = lambda z: abs(z.real) <= VIEW and abs(z.imag) <= VIEW  # noqa: E731
    zeros = [(z, k) for z, k in zeros if in_view(z)]
    poles = [q for q in poles if in_view(q)]
    seps = []
    if cfg.get("separatrices", cfg["field"] == "X0") and cfg["field"] == "X0":
        seps = [s.polyline for s in trace_separatrices(fields[0]).separatrices]
    with open(out / "trajectories.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["traj_id", "t", "re", "im"])
        for i, tr in enumerate(trajs):
            for s, z in tr:
                w.writerow([i, "%.9g" % s, "%.9g" % z.real, "%.9g" % z.imag])
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{PIXELS}" height="{PIXELS}" '
             f'viewBox="0 0 {PIXELS} {PIXELS}">',
             f'<rect width="{PIXELS}" height="{PIXELS}" fill="white"/>']
    parts += [_polyline_svg([z for _, z in tr], "#555555", 0.6) for tr in trajs]
    parts += [_polyline_svg(s, "#cc0000", 1.4) for s in seps]
    for z, k in zeros:
        x, y = _px(z)
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{5 + 2 * k}" fill="#22aa22"/>')
    for q in poles:
        x, y = _px(q)
        parts.append(f'<rect x="{x - 5:.2f}" y="{y - 5:.2f}" width="10" height="10" fill="#cc0000"/>')
    parts.append("</svg>")
    (out / "portrait.svg").write_text("\n".join(s for s in parts if s) + "\n", encoding="utf-8")
    summary = {
        "stationary_points": len(zeros),
        "zeros_with_multiplicity": sum(k for _, k in zeros),
        "poles": len(poles),
        "zeros": [[z.real, z.imag, k] for z, k in zeros],
        "pole_locations": [[q.real, q.imag] for q in poles],
        "trajectories": len(trajs),
    }
    _write_json(out / "portrait.json", summary)
    print(f"stationary={summary['stationary_points']} poles={summary['poles']} "
          f"trajectories={len(trajs)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _check(name: str, value: float, limit: float, relation: str = "<") -> dict:
    ok = value < limit if relation == "<" else value <= limit if relation == "<=" else value == limit
    return {"check": name, "value": float(value), "limit": float(limit), "relation": relation,
            "passed": bool(ok)}


def suite_model(cfg: dict, rng: np.random.Generator) -> list[dict]:
    from .model import eval_H0, eval_X0, involution_sigma

    p = ModelParams(cfg.get("lambda", 0.05), _complex(cfg.get("mu", 0)))
    z = np.exp(rng.uniform(-1, 1, 40)) * np.exp(1j * rng.uniform(-1.8, 1.8, 40))
    pull = eval_X0(involution_sigma(z), p) * z * z
    inv = float(np.max(np.abs(pull - eval_X0(z, p)) / np.abs(eval_X0(z, p))))
    h = 1e-6
    zz = z[(np.abs(np.angle(z)) < 1.5)]
    dh = (eval_H0(zz + h, "+", p) - eval_H0(zz - h, "+", p)) / (2 * h)
    prim = float(np.max(np.abs(eval_X0(zz, p) * dh / (2j * math.pi * eval_H0(zz, "+", p)) - 1)))
    from .renorm import magnitude_bounds

    mb = magnitude_bounds(min(p.lam, 0.1), p.mu if abs(p.mu) * min(p.lam, 0.1) < 0.5 else 0)
    return [_check("sigma_invariance", inv, 1e-10),
            _check("first_integral", prim, 1e-6),
            _check("magnitude_lower", 1.0 / mb["lower_ratio"], 1.0, "<="),
            _check("magnitude_upper", mb["upper_ratio"], 1.0, "<="),
            _check("lie_derivative", mb["lie_ratio"], 1.0, "<=")]


def suite_flow(cfg: dict, rng: np.random.Generator) -> list[dict]:
    from .flow import polar_field, polar_time1_oracle

    lam = cfg.get("lambda", 0.01)
    p = ModelParams(lam, 0)
    X = model_field(p)
    worst = 0.0
    for z in rng.uniform(0.2, 0.8, 10) * np.exp(1j * rng.uniform(-0.6, 0.6, 10)):
        d = flow(X, complex(z), 1.0).endpoint
        worst = max(worst, abs(z * d * d - (z * z + lam * z - 1) * d - z))
    W = polar_field()
    pol = 0.0
    for w in 0.5 + rng.uniform(0, 1, 10) + 1j * rng.uniform(-1, 1, 10):
        pol = max(pol, abs(flow(W, complex(w), 1.0, 1e-12).endpoint - polar_time1_oracle(complex(w))))
    return [_check("algebraic_oracle", worst, 1e-9), _check("polar_oracle", pol, 1e-9)]


def suite_cauchyheine(cfg: dict, rng: np.random.Generator) -> list[dict]:
    from .cauchyheine import SectorialPair, jump_residual, random_unit_pair, standard_rays
    from .synthesis import horn_sample_points

    lam = cfg.get("lambda", 0.5)
    p = ModelParams(lam, _complex(cfg.get("mu", 0)))
    m = ModulusData(p.mu, Germ([0, 0.1]))
    rays = standard_rays(p)
    z = np.concatenate(list(horn_sample_points(30).values()))
    out = []
    for name, f in (("jump_zero", SectorialPair.zero(rays)), ("jump_random", random_unit_pair(rays, rng))):
        res = jump_residual(f, m, p, z)
        out.append(_check(name, float(np.max(np.abs(res))), 1e-7))
    return out


def suite_synthesis(cfg: dict, rng: np.random.Generator) -> list[dict]:
    from .synthesis import fixed_point_residual, measure_horn_maps, synthesize

    m = ModulusData.from_json(cfg["modulus"]) if "modulus" in cfg else ModulusData(0, Germ([0, 0.05]))
    r = synthesize(m, cfg.get("lambda", 0.5))
    horn = measure_horn_maps(r)
    d = r.diagnostics
    return [_check("horn_residual", horn.max_psi_error, 1e-5),
            _check("fixed_point_residual", fixed_point_residual(r), 1e-9),
            _check("final_norm_vs_ball", d["sampled_f_norm"], 1.05 * d["ball_radius"] + 1e-300, "<=")]


def suite_globalize(cfg: dict, rng: np.random.Generator) -> list[dict]:
    from .globalize import find_poles, modulus_at_infinity, pole_counts, sigma_pole_symmetry
    from .synthesis import synthesize

    m = ModulusData.from_json(cfg["modulus"]) if "modulus" in cfg else ModulusData(0, Germ([0, 0.05]))
    r = synthesize(m, cfg.get("lambda", 1 / 25600))
    reps = find_poles(r)
    counts = pole_counts(r, reps)
    out = [_check(f"pole_{rep.label}_distance", rep.distance, rep.allowed) for rep in reps]
    out += [_check(f"pole_{k}_count", abs(v - 1), 0, "==") for k, v in counts.items()]
    out.append(_check("sigma_set_symmetry", sigma_pole_symmetry(r, reps)["set_distance"], 1e-7))
    out.append(_check("modulus_at_infinity", modulus_at_infinity(r).max_composition_error, 1e-5))
    return out


def suite_renorm(cfg: dict, rng: np.random.Generator) -> list[dict]:
    from .renorm import DERIVATIVE_BOUND, DELTA_BALL, renorm_bound, renorm_fixed_point

    phi0 = Germ([0, 0.02])
    lam = cfg.get("lambda", renorm_bound(phi0).lambda_hat)
    _, st = renorm_fixed_point(phi0, lam)
    out = [_check("ratio", max(st.ratios, default=0.0), 0.1, "<=")]
    out.append(_check("derivative_bound", max(st.derivative_sups), DERIVATIVE_BOUND, "<="))
    out.append(_check("delta_ball", max(st.delta_sups), DELTA_BALL))
    return out


SUITES = {
    "model": suite_model,
    "flow": suite_flow,
    "cauchyheine": suite_cauchyheine,
    "synthesis": suite_synthesis,
    "globalize": suite_globalize,
    "renorm": suite_renorm,
}


def cmd_verify(cfg: dict, out: Path, args) -> int:
    suite = args.suite or cfg.get("suite")
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    rng = np.random.default_rng(args.seed)
    checks = SUITES[suite](cfg, rng)
    passed = all(c["passed"] for c in checks)
    _write_json(out / f"verify_{suite}.json", {"suite": suite, "passed": passed, "checks": checks})
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {suite}.{c['check']} "
              f"value={c['value']:.3e} {c['relation']} {c['limit']:.3e}")
    return EXIT_OK if passed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# renorm
# ---------------------------------------------------------------------------


def cmd_renorm(cfg: dict, out: Path, args) -> int:
    from .renorm import renorm_bound, renorm_fixed_point

    phi0 = germ_from_json(cfg["phi0"])
    mu = _complex(cfg.get("mu"))
    bound = renorm_bound(phi0, mu)
    lam = cfg.get("lambda", "auto")
    lam = bound.lambda_hat if lam == "auto" else float(lam)
    if lam > bound.lambda_hat and not args.force:
        raise ConfigError(f"lambda={lam:.4g} exceeds lambda_hat={bound.lambda_hat:.4g}; use --force")
    code = EXIT_OK
    try:
        _, state = renorm_fixed_point(phi0, lam, cfg.get("tol", 1e-10), cfg.get("max_iter", 30),
                                      mu=mu, force=args.force)
        converged = True
    except MaxIter as exc:
        state = getattr(exc, "state", None)
        if state is None:
            raise
        converged = False
        code = EXIT_NUMERICAL
    history = state.to_json()
    history.update({"converged": converged, "lambda": lam, "bound": bound.to_json()})
    _write_json(out / "renorm.json", history)
    print(f"steps={state.index} converged={converged} diffs={['%.2e' % d for d in state.diffs]}")
    return code


COMMANDS = {"synth": cmd_synth, "portrait": cmd_portrait, "verify": cmd_verify, "renorm": cmd_renorm}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parabsynth", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--suite", help="verification suite (verify only)")
    ap.add_argument("--force", action="store_true", help="allow twists above the proven bound")
    ap.add_argument("--seed", type=int, default=0, help="random seed")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            if args.command != "verify":
                raise ConfigError("--config is required")
            cfg = {}
        else:
            cfg = load_config(args.config, args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ParabSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
