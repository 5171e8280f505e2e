"""Command-line entry point: ``hmmforget <subcommand> [options]``.

Every artifact embeds the effective config (JSON key ``config`` or a leading
``# config: {...}`` CSV line).  Passing an artifact back through ``--config``
regenerates it byte for byte.  Exit codes: 0 success, 1 usage or input error,
2 hypothesis failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds, memloss, perturb2
from .cocycle import HypothesisFailure, expected_log_det, lyapunov_spectrum
from .config import KINDS, METHODS, MODES, config_from_dict, load_config
from .errors import ContractionFailure, HmmError, OutsideValidity
from .model import check_hypotheses
from .simulate import derive_seed, past_window, sample_path, write_path_csv

OUTPUT_DIR_ENV = "HMMFORGET_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_VERIFY = 0, 1, 2, 3

EXTENSIONS = {"check": "json", "simulate": "csv", "lyapunov": "json", "decay": "csv",
              "rates": "json", "verify": "json", "perturb-sweep": "csv"}
SEEDLESS = {"check"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, nan to null, infinities to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
    return x


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def config_line(effective: dict) -> str:
    return "# config: " + json.dumps(_clean(effective), sort_keys=True, separators=(",", ":")) + "\n"


def _fmt(x) -> str:
    return repr(float(x))


# -- subcommands: each returns (exit code, artifact text, summary line) ---------------


def cmd_check(cfg, model, eff):
    rep = check_hypotheses(model)
    ok = rep.h1_holds and rep.h2_holds
    body = dump_json({"config": eff, "hypotheses": rep.to_dict()})
    summary = f"check: H1={'ok' if rep.h1_holds else 'FAIL'} H2={'ok' if rep.h2_holds else 'FAIL'}"
    return (EXIT_OK if ok else EXIT_HYPOTHESIS), body, summary


def cmd_simulate(cfg, model, eff):
    import io

    path = sample_path(model, cfg.T, cfg.seed)
    buf = io.StringIO()
    buf.write(config_line(eff))
    write_path_csv(path, buf)
    return EXIT_OK, buf.getvalue(), f"simulate: T={cfg.T} seed={cfg.seed}"


def cmd_lyapunov(cfg, model, eff):
    path = sample_path(model, cfg.N_lyap, cfg.seed)
    r = model.k if cfg.r is None else cfg.r
    est = lyapunov_spectrum(model, path, r=r, permissive=True)
    out = {
        "config": eff,
        "lambdas": est.lambdas,
        "std_errors": est.std_errors,
        "underflow_flags": est.underflow_flags.tolist(),
        "n_steps": est.n_steps,
        "distinct": est.distinct(),
        "gap": est.gap,
        "gap_std_error": est.gap_std_error,
    }
    if r == model.k:
        out["sum"] = float(est.lambdas.sum())
        out["sum_std_error"] = est.sum_std_error
        out["expected_log_det"] = expected_log_det(model)
    summary = "lyapunov: " + " ".join(f"{x:.6f}" for x in est.lambdas) + f" gap={est.gap:.6f}"
    return EXIT_OK, dump_json(out), summary


def _window(cfg, model):
    n = cfg.n_max - 1
    return past_window(sample_path(model, n, derive_seed(cfg.seed, 1)), n)


def _curves(cfg, model):
    make = memloss.delta_curve if cfg.kind == "delta" else memloss.delta_tilde_curve
    return make(model, _window(cfg, model), triples=cfg.triples, n_max=cfg.n_max)


def cmd_decay(cfg, model, eff):
    import io

    curves = _curves(cfg, model)
    buf = io.StringIO()
    buf.write(config_line(eff))
    memloss.write_curves_csv(curves, buf)
    return EXIT_OK, buf.getvalue(), f"decay: {len(curves)} curves, n_max={cfg.n_max}"


def cmd_rates(cfg, model, eff):
    curves = _curves(cfg, model)
    rates = {m: [memloss.estimate_rate(c, method=m) for c in curves] for m in METHODS}
    best = memloss.best_rate(rates[cfg.method])
    gap = memloss.matched_gap(model, _window(cfg, model), best) if math.isfinite(best.tau_hat) \
        else float("nan")
    out = {
        "config": eff,
        "rates": [r.to_dict() for m in METHODS for r in rates[m]],
        "best": best.to_dict(),
        "matched_gap": gap,
    }
    summary = f"rates: best {'-'.join(map(str, best.triple))} tau={best.tau_hat:.6f} gap={gap:.6f}"
    return EXIT_OK, dump_json(out), summary


def cmd_verify(cfg, model, eff):
    v = bounds.verify_model(model, cfg.seed, n_windows=cfg.n_windows, n_max=cfg.n_max,
                            N_lyap=cfg.N_lyap, tol=cfg.tol, method=cfg.method)
    out = {"config": eff, **v.to_dict()}
    rep = v.report
    summary = (f"verify: {'PASS' if v.passed else 'FAIL'} gap={rep.lyap_gap:.6f} "
               f"violations={len(rep.theorem1_violations)} attained={rep.theorem2_attained}")
    return (EXIT_OK if v.passed else EXIT_VERIFY), dump_json(out), summary


SWEEP_COLUMNS = ("epsilon", "lambda1_qr", "lambda2_qr", "lambda1_birkhoff",
                 "ledet_identity_residual", "rate_bound", "best_triple_tau")


def sweep_row(cfg, i, eps):
    seed = derive_seed(cfg.seed, i)
    pm = perturb2.build_perturb(cfg.p0, cfg.p1, eps)
    hmm = perturb2.to_hmm(pm)
    est = lyapunov_spectrum(hmm, sample_path(hmm, cfg.steps, seed), r=2, permissive=True)
    try:
        birk = perturb2.lambda1_birkhoff(pm, cfg.steps, seed, cfg.depth, cfg.mode).value
    except (ContractionFailure, OutsideValidity):
        birk = float("nan")
    rb = perturb2.binary_rate_bound(pm)
    resid = abs(est.lambdas.sum() - rb.ledet) if np.all(np.isfinite(est.lambdas)) else float("nan")
    try:
        n = cfg.n_max - 1
        window = past_window(sample_path(hmm, n, derive_seed(seed, 1)), n)
        rates = [memloss.estimate_rate(c, method=cfg.method)
                 for c in memloss.delta_curve(hmm, window, n_max=cfg.n_max)]
        tau = memloss.best_rate(rates).tau_hat
    except HypothesisFailure:
        tau = float("nan")
    return (eps, est.lambdas[0], est.lambdas[1], birk, resid, rb.bound, tau)


def cmd_perturb_sweep(cfg, model, eff):
    import io

    buf = io.StringIO()
    buf.write(config_line(eff))
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for i, eps in enumerate(cfg.eps_grid):
        buf.write(",".join(_fmt(x) for x in sweep_row(cfg, i, eps)) + "\n")
    return EXIT_OK, buf.getvalue(), f"perturb-sweep: {len(cfg.eps_grid)} epsilons, mode={cfg.mode}"


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "lyapunov": cmd_lyapunov,
            "decay": cmd_decay, "rates": cmd_rates, "verify": cmd_verify,
            "perturb-sweep": cmd_perturb_sweep}

# flag -> (config field, type, help)
FLAGS = {
    "check": ["model"],
    "simulate": ["model", "seed", "T"],
    "lyapunov": ["model", "seed", "N_lyap", "r"],
    "decay": ["model", "seed", "n_max", "kind", "triples"],
    "rates": ["model", "seed", "n_max", "kind", "triples", "method"],
    "verify": ["model", "seed", "n_max", "N_lyap", "n_windows", "tol", "method"],
    "perturb-sweep": ["seed", "p0", "p1", "eps_grid", "steps", "n_max", "depth", "mode", "method"],
}


def _triples(text):
    try:
        out = [[int(x) for x in t.split("-")] for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("triples look like 1-1-2,1-2-1") from None
    if any(len(t) != 3 for t in out):
        raise argparse.ArgumentTypeError("triples look like 1-1-2,1-2-1")
    return out


def _floats(text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from None


def _add_flag(p, name):
    if name == "model":
        p.add_argument("--model", dest="model_path", help="model JSON file with keys p and q")
    elif name == "seed":
        p.add_argument("--seed", type=int, help="master seed (required unless in --config)")
    elif name in ("T", "N_lyap", "n_max", "n_windows", "steps", "depth", "r"):
        flag = "--" + name.replace("_", "-").lower() if name != "N_lyap" else "--n-lyap"
        p.add_argument(flag, dest=name, type=int)
    elif name in ("tol", "p0", "p1"):
        p.add_argument("--" + name, dest=name, type=float)
    elif name == "method":
        p.add_argument("--method", choices=METHODS)
    elif name == "kind":
        p.add_argument("--kind", choices=KINDS)
    elif name == "mode":
        p.add_argument("--mode", choices=MODES)
    elif name == "triples":
        p.add_argument("--triples", type=_triples, help="e.g. 1-1-2,1-2-1")
    elif name == "eps_grid":
        p.add_argument("--eps-grid", dest="eps_grid", type=_floats, help="e.g. 0.02,0.05,0.1")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hmmforget", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="config JSON, or any artifact written by this tool")
        p.add_argument("--out", help=f"output file (default: ${OUTPUT_DIR_ENV} or cwd)")
        for flag in FLAGS[name]:
            _add_flag(p, flag)
    return parser


def resolve_config(args):
    base = {}
    if args.config:
        base = {k: v for k, v in vars(load_config(args.config)).items() if v is not None}
        base.pop("output", None)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "out") and v is not None}
    if "model_path" in overrides:
        base.pop("model", None)
    base.update(overrides)
    if args.command in SEEDLESS:
        base.setdefault("seed", 0)
    if args.out:
        base["output"] = args.out
    return config_from_dict(base)


def output_path(cfg, command) -> Path:
    if cfg.output:
        return Path(cfg.output)
    root = Path(os.environ.get(OUTPUT_DIR_ENV) or ".")
    return root / f"{command.replace('-', '_')}.{EXTENSIONS[command]}"


def run(command, cfg) -> int:
    model = None if command == "perturb-sweep" else cfg.load_model()
    eff = cfg.effective(model)
    code, text, summary = COMMANDS[command](cfg, model, eff)
    out = output_path(cfg, command)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(f"{summary} -> {out}")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        return run(args.command, cfg)
    except UsageError as exc:
        print(f"hmmforget: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisFailure as exc:
        print(f"hmmforget: hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (HmmError, OSError) as exc:
        print(f"hmmforget: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
