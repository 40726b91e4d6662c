"""Command-line interface: ``lbdn <subcommand> [flags]``.

Exit codes: 0 success, 1 certificate check failed, 2 usage error, 3 runtime
error. Errors are reported on stderr as a JSON object.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .certify import certify_weights, check_certificate
from .converse import linear_factors, params_from_lmi
from .exceptions import LBDNError
from .lipest import lipest_report
from .numerics import sigma_max
from .sandwich import extract_weights, init_params, random_params, realize
from .train import TrainConfig, fit

EXIT_OK, EXIT_UNCERTIFIED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    """Make a report JSON-safe: arrays to lists, non-finite floats to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(doc, out=None):
    doc = {"format_version": io.FORMAT_VERSION, **_clean(doc)}
    text = json.dumps(doc, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_model(path):
    kind, obj = io.load_document(path)
    if kind != "model":
        raise UsageError(f"{path} holds explicit weights; a parameterized model is required")
    return realize(obj)


def _add_estimator_flags(p, restarts=32, iters=500):
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--iters", type=int, default=iters)
    p.add_argument("--step", type=float, default=0.05)


def build_parser():
    parser = _Parser(prog="lbdn", description="Lipschitz-bounded deep networks by direct parameterization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", help="write a freshly initialized (or randomly drawn) model")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--width", type=int, default=86)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--inputs", type=int, default=1)
    p.add_argument("--outputs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--activation", choices=["relu", "identity", "tanh"], default="relu")
    p.add_argument("--random", action="store_true", help="draw every parameter class at random")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="train a model on the square-wave task")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--width", type=int, default=86)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--activation", choices=["relu", "identity", "tanh"], default="relu")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--metrics", help="per-epoch metrics CSV path (default: next to --out)")
    _add_estimator_flags(p)

    p = sub.add_parser("certify", help="LMI certificate report for a model or weights file")
    p.add_argument("--model", required=True)
    p.add_argument("--out")

    p = sub.add_parser("lipest", help="empirical lower Lipschitz bound")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-per-layer", action="store_true")
    p.add_argument("--out")
    _add_estimator_flags(p)

    p = sub.add_parser("roundtrip", help="recover free parameters from weights and report residuals")
    p.add_argument("--model", required=True, help="weights JSON (a model JSON is exported first)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="recovered model JSON path")

    p = sub.add_parser("export", help="explicit weights W, b and multipliers Lambda")
    p.add_argument("--model", required=True)
    p.add_argument("--out")

    p = sub.add_parser("figures", help="CSV tables of tightness and per-layer spectral norms")
    p.add_argument("--model", required=True, action="append", help="repeatable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    _add_estimator_flags(p)
    return parser


def cmd_init(args):
    widths = [args.inputs] + [args.width] * args.depth + [args.outputs]
    make = random_params if args.random else init_params
    params = make(widths, args.gamma, seed=args.seed, activation=args.activation)
    io.save_params(args.out, params)
    _emit({"model": args.out, "widths": widths, "gamma": args.gamma})
    return EXIT_OK


def cmd_fit(args):
    config = TrainConfig(
        gamma=args.gamma, depth=args.depth, width=args.width, epochs=args.epochs, seed=args.seed,
        activation=args.activation, lipest={"restarts": args.restarts, "iters": args.iters, "step": args.step},
    )
    result = fit(config)
    io.save_params(args.out, result.params)
    metrics_path = args.metrics or str(Path(args.out).with_suffix("")) + "_metrics.csv"
    io.write_metrics(metrics_path, result.metrics)
    last = result.metrics[-1] if result.metrics else {}
    _emit({"model": args.out, "metrics": metrics_path, "final": last})
    return EXIT_OK


def cmd_certify(args):
    kind, obj = io.load_document(args.model)
    if kind == "model":
        report = check_certificate(realize(obj))
    else:
        report = certify_weights(obj.W, obj.Lambda, obj.gamma)
    _emit({"source": kind, **report.to_dict()}, args.out)
    return EXIT_OK if report.psd else EXIT_UNCERTIFIED


def cmd_lipest(args):
    model = _load_model(args.model)
    report = lipest_report(model, args.restarts, args.iters, args.step, args.seed, per_layer=not args.no_per_layer)
    _emit(report, args.out)
    return EXIT_OK


def _linear_residuals(W, seed):
    rows = []
    for k, Wk in enumerate(W):
        if sigma_max(Wk) > 1.0:
            rows.append({"layer": k, "skipped": "spectral norm exceeds 1"})
            continue
        A, B = linear_factors(Wk, seed=[seed, k])
        rows.append({"layer": k, "residual": float(np.max(np.abs(2.0 * A.T @ B - Wk), initial=0.0))})
    return rows


def cmd_roundtrip(args):
    kind, obj = io.load_document(args.model)
    weights = extract_weights(realize(obj)) if kind == "model" else obj
    params = params_from_lmi(weights.W, weights.Lambda, weights.gamma, seed=args.seed,
                             activation=weights.activation, biases=weights.b)
    again = extract_weights(realize(params))
    residuals = [float(np.max(np.abs(a - b), initial=0.0)) for a, b in zip(weights.W, again.W)]
    if args.out:
        io.save_params(args.out, params)
    _emit({
        "source": kind, "out": args.out, "max_residual": max(residuals), "layer_residuals": residuals,
        "linear": _linear_residuals(weights.W, args.seed),
    })
    return EXIT_OK


def cmd_export(args):
    weights = extract_weights(_load_model(args.model))
    doc = io.weights_to_dict(weights)
    if args.out:
        io.write_json(args.out, doc)
    else:
        print(io.dumps(doc))
    return EXIT_OK


def cmd_figures(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tight_rows, norm_rows = [], []
    for path in args.model:
        model = _load_model(path)
        rep = lipest_report(model, args.restarts, args.iters, args.step, args.seed, per_layer=True)
        cert = check_certificate(model)
        tight_rows.append({
            "model": path, "gamma": model.gamma, "lower_bound": rep["lower_bound"], "tightness": rep["tightness"],
            "naive_product": cert.naive_spectral_product, "weighted_product": cert.weighted_product,
        })
        for k, norm in enumerate(cert.layer_spectral_norms):
            layer = rep["per_layer"][k]
            norm_rows.append({
                "model": path, "gamma": model.gamma, "layer": k, "spectral_norm": norm,
                "weighted_bound": cert.per_layer_weighted_bounds[k],
                "layer_lower_bound": layer["lower_bound"], "layer_tightness": layer["tightness"],
            })
    io.write_csv(out / "tightness.csv", tight_rows)
    io.write_csv(out / "layer_norms.csv", norm_rows)
    _emit({"tightness": str(out / "tightness.csv"), "layer_norms": str(out / "layer_norms.csv")})
    return EXIT_OK


COMMANDS = {
    "init": cmd_init, "fit": cmd_fit, "certify": cmd_certify, "lipest": cmd_lipest,
    "roundtrip": cmd_roundtrip, "export": cmd_export, "figures": cmd_figures,
}


def _fail(kind, message, code):
    print(json.dumps({"error": kind, "message": str(message)}), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("UsageError", exc, EXIT_USAGE)
    except (LBDNError, OSError, ValueError, KeyError, TypeError) as exc:
        return _fail(type(exc).__name__, exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
