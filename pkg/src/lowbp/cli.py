"""Command-line toolkit: code construction, expansion, offline optimization,
decoding, and Monte Carlo BER evaluation.

Exit codes: 0 success, 2 configuration error, 3 completed with a
non-convergence warning (partial output is still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from lowbp import channel
from lowbp.code_model import (
    AlistError,
    CodeParams,
    DegreeProfile,
    FactorGraph,
    ProfileError,
    girth,
    load_alist,
    peg_construct,
    save_alist,
)
from lowbp.decoder import decode
from lowbp.fap_optimizer import OptimizerConfig
from lowbp.harness import (
    DecoderVariant,
    SimConfig,
    export_results,
    export_rho_histogram,
    grid_search_urw,
    load_artifact,
    run_ber,
    run_offline,
    save_artifact,
)
from lowbp.subgraph_expansion import CoverageError, ExpansionConfig, peg_expand

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WARN = 3


class ConfigError(Exception):
    pass


def _coerce(text: str):
    low = text.strip()
    if low.lower() in ("true", "false"):
        return low.lower() == "true"
    for cast in (int, float):
        try:
            return cast(low)
        except ValueError:
            continue
    return low


def _load_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, _, val = line.partition("=")
                values[key.strip().replace("-", "_")] = _coerce(val)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return values


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--kernel", choices=("tanh", "jacobian"), default="jacobian")
    parser.add_argument("--max-iters", type=int, default=60)
    parser.add_argument("--snr", type=str, default="2.0", help="dB value, or comma list")
    parser.add_argument("--config", type=str, default=None, help="key=value file mirroring flags")
    parser.add_argument("-o", "--output", type=str, default=None)


def _build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="lowbp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    p = commands["construct"] = sub.add_parser("construct", help="build a code by progressive edge growth")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--col-weight", type=int, default=None)
    p.add_argument("--var-degrees", type=str, default=None, help="'deg:frac,deg:frac,...'")

    p = commands["girth"] = sub.add_parser("girth", help="shortest cycle length of a code's factor graph")
    _common(p)
    p.add_argument("--alist", required=True)

    p = commands["expand"] = sub.add_parser("expand", help="split the factor graph into subgraphs")
    _common(p)
    p.add_argument("--alist", required=True)
    p.add_argument("--strategy", choices=("disjoint", "ra"), default="disjoint")
    p.add_argument("--d-max", type=int, default=2)

    p = commands["optimize"] = sub.add_parser("optimize", help="offline reweighting optimization")
    _common(p)
    p.add_argument("--alist", required=True)
    p.add_argument("--strategy", choices=("disjoint", "ra", "whole"), default="disjoint")
    p.add_argument("--d-max", type=int, default=2)
    p.add_argument("--training-frames", type=int, default=1000)
    p.add_argument("--step-rule", choices=("line-search", "diminishing"), default="line-search")
    p.add_argument("--recursions", type=int, default=60)
    p.add_argument("--mp-iters", type=int, default=20)
    p.add_argument("--rho-init", type=float, default=0.9)

    p = commands["decode"] = sub.add_parser("decode", help="decode one frame of LLRs from stdin")
    _common(p)
    p.add_argument("--alist", required=True)
    p.add_argument("--artifact", default=None, help="rho artifact JSON (default: plain BP)")
    p.add_argument("--rho-u", type=float, default=None, help="constant reweighting value")

    p = commands["ber"] = sub.add_parser("ber", help="Monte Carlo BER/FER evaluation")
    _common(p)
    p.add_argument("--alist", required=True)
    p.add_argument("--variant", choices=("bp", "urw", "low"), default="bp")
    p.add_argument("--rho-u", type=float, default=0.9)
    p.add_argument("--artifact", default=None)
    p.add_argument("--max-frames", type=int, default=10_000)
    p.add_argument("--min-bit-errors", type=int, default=200)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = commands["urw-grid"] = sub.add_parser("urw-grid", help="grid search the constant reweighting value")
    _common(p)
    p.add_argument("--alist", required=True)
    p.add_argument("--grid", type=str, default="0.7,0.8,0.9,1.0")
    p.add_argument("--max-frames", type=int, default=2000)

    p = commands["histogram"] = sub.add_parser("histogram", help="histogram CSV of an artifact's rho values")
    _common(p)
    p.add_argument("--artifact", required=True)
    p.add_argument("--bin-width", type=float, default=0.05)
    return parser, commands


def _parse_args(argv):
    parser, commands = _build_parser()
    # first pass only to find --config; its values become new defaults on
    # every subcommand parser (defaults set on the parent do not propagate)
    probe, _ = parser.parse_known_args(argv)
    if getattr(probe, "config", None):
        values = _load_config_file(probe.config)
        for sub in commands.values():
            sub.set_defaults(**values)
    return parser.parse_args(argv)


def _snr_list(text) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"bad --snr value: {text!r}") from None


def _read_matrix(path: str):
    try:
        with open(path, "rb") as fh:
            return load_alist(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read alist: {exc}") from None
    except AlistError as exc:
        raise ConfigError(f"bad alist: {exc}") from None


def _write_output(data: bytes, path: str | None):
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)


def _cmd_construct(args) -> int:
    params = CodeParams(args.n, args.m)
    if args.col_weight is not None:
        profile = DegreeProfile.from_variable_degrees([(args.col_weight, 1.0)], params)
    elif args.var_degrees:
        pairs = []
        for tok in args.var_degrees.split(","):
            d, _, f = tok.partition(":")
            pairs.append((int(d), float(f)))
        profile = DegreeProfile.from_variable_degrees(pairs, params)
    else:
        raise ConfigError("construct needs --col-weight or --var-degrees")
    matrix = peg_construct(params, profile, args.seed)
    _write_output(save_alist(matrix), args.output)
    return EXIT_OK


def _cmd_girth(args) -> int:
    g = girth(FactorGraph(_read_matrix(args.alist)))
    print("inf" if math.isinf(g) else int(g))
    return EXIT_OK


def _cmd_expand(args) -> int:
    matrix = _read_matrix(args.alist)
    try:
        subgraph_set = peg_expand(
            FactorGraph(matrix), ExpansionConfig(args.strategy, args.d_max, args.seed)
        )
    except CoverageError as exc:
        raise ConfigError(str(exc)) from None
    _write_output(subgraph_set.to_json().encode() + b"\n", args.output)
    return EXIT_OK


def _cmd_optimize(args) -> int:
    matrix = _read_matrix(args.alist)
    snr = _snr_list(args.snr)[0]
    opt_cfg = OptimizerConfig(
        step_rule=args.step_rule,
        max_recursions=args.recursions,
        mp_iterations=args.mp_iters,
        kernel=args.kernel,
        rho_init=args.rho_init,
    )
    result = run_offline(
        matrix,
        strategy="disjoint" if args.strategy == "whole" else args.strategy,
        d_max=args.d_max,
        snr_db=snr,
        seed=args.seed,
        training_frames=args.training_frames,
        opt_cfg=opt_cfg,
        whole_graph=args.strategy == "whole",
    )
    if args.output:
        save_artifact(result, args.output)
    else:
        json.dump(result.artifact, sys.stdout, indent=1, sort_keys=True)
        print()
    unconverged = [
        i for i, entry in enumerate(result.artifact["per_subgraph"]) if not entry["converged"]
    ]
    if unconverged:
        print(f"warning: subgraphs not converged at recursion cap: {unconverged}", file=sys.stderr)
        return EXIT_WARN
    return EXIT_OK


def _cmd_decode(args) -> int:
    matrix = _read_matrix(args.alist)
    m = matrix.params.n_checks
    if args.artifact:
        doc = load_artifact(args.artifact, matrix)
        rho = np.asarray(doc["rho"])
    elif args.rho_u is not None:
        rho = np.full(m, args.rho_u)
    else:
        rho = np.ones(m)
    tokens = sys.stdin.read().split()
    if len(tokens) != matrix.params.n_vars:
        raise ConfigError(
            f"expected {matrix.params.n_vars} LLRs on stdin, got {len(tokens)}"
        )
    llr = np.array([float(t) for t in tokens])
    res = decode(matrix, llr, rho, args.max_iters, args.kernel)
    print("".join(str(int(b)) for b in res.hard_decision))
    print(
        f"converged={str(res.converged).lower()} iterations={res.iterations_used}",
        file=sys.stderr,
    )
    return EXIT_OK if res.converged else EXIT_WARN


def _cmd_ber(args) -> int:
    matrix = _read_matrix(args.alist)
    if args.variant == "low":
        if not args.artifact:
            raise ConfigError("LOW variant needs --artifact")
        doc = load_artifact(args.artifact, matrix)
        variant = DecoderVariant("low", rho=np.asarray(doc["rho"]))
    elif args.variant == "urw":
        variant = DecoderVariant("urw", rho_u=args.rho_u)
    else:
        variant = DecoderVariant("bp")
    cfg = SimConfig(
        snr_points_db=_snr_list(args.snr),
        max_iterations=args.max_iters,
        max_frames=args.max_frames,
        min_bit_errors=args.min_bit_errors,
        kernel=args.kernel,
        seed=args.seed,
    )
    points = run_ber(matrix, variant, cfg)
    _write_output(export_results(points, args.format), args.output)
    return EXIT_OK


def _cmd_urw_grid(args) -> int:
    matrix = _read_matrix(args.alist)
    grid = tuple(float(t) for t in args.grid.split(",") if t.strip())
    snr = _snr_list(args.snr)[0]
    cfg = SimConfig(
        snr_points_db=(snr,),
        max_iterations=args.max_iters,
        max_frames=args.max_frames,
        min_bit_errors=10**9,
        kernel=args.kernel,
        seed=args.seed,
    )
    best = grid_search_urw(matrix, snr, grid, cfg)
    print(f"{best:g}")
    return EXIT_OK


def _cmd_histogram(args) -> int:
    try:
        doc = load_artifact(args.artifact)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read artifact: {exc}") from None
    _write_output(export_rho_histogram(doc, args.bin_width), args.output)
    return EXIT_OK


_COMMANDS = {
    "construct": _cmd_construct,
    "girth": _cmd_girth,
    "expand": _cmd_expand,
    "optimize": _cmd_optimize,
    "decode": _cmd_decode,
    "ber": _cmd_ber,
    "urw-grid": _cmd_urw_grid,
    "histogram": _cmd_histogram,
}


def main(argv=None) -> int:
    try:
        args = _parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProfileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
