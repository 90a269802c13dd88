"""Command-line front end.

Examples::

    fragility acdec --norm lambda:1 --gamma 1,1,1
    fragility fi --norm max --gamma 1,0.5,0.25
    fragility cluster --norm mo:0.3 --d 5 --kappa 2
    fragility vanishes --norm xi --m 3
    fragility sweep --model gpd.json --quantiles 0.999,0.9999 --n 1000000 --seed 1

Exit status: 0 on success, 2 on invalid input, 3 when ``FI(m)`` is undefined
and ``--allow-undefined`` was not given.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from fragility import cluster as cl
from fragility import exceedance as ex
from fragility import simulate as sim
from fragility.dnorm import (
    DiscreteGeneratorNorm,
    DNorm,
    DNormError,
    IIDUniformNorm,
    LambdaNorm,
    MarshallOlkinNorm,
    MaxNorm,
    MonteCarloNorm,
    make_xi_generator,
    norm_from_dict,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNDEFINED = 3


class UsageError(Exception):
    """Bad input; reported on stderr with exit status 2."""


def _load_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def resolve_norm(args: argparse.Namespace) -> DNorm:
    gamma = _parse_floats(args.gamma, "--gamma") if args.gamma else None
    d = args.d if args.d is not None else (len(gamma) if gamma else None)
    spec = args.norm
    fam, _, arg = spec.partition(":")

    def need_d() -> int:
        if d is None:
            raise UsageError(f"--norm {spec} needs --d or --gamma to fix the dimension")
        return d

    if fam == "lambda":
        norm: DNorm = LambdaNorm(need_d(), float(arg or 1.0))
    elif fam == "max":
        norm = MaxNorm(need_d())
    elif fam == "mo":
        norm = MarshallOlkinNorm(need_d(), float(arg))
    elif fam == "iid_uniform":
        norm = IIDUniformNorm(need_d())
    elif fam == "xi":
        norm = DiscreteGeneratorNorm(make_xi_generator())
    elif fam == "mc":
        norm = MonteCarloNorm(need_d(), arg or "iid_uniform", args.n or 1_000_000, args.seed)
    elif fam in ("gen", "spec") or spec.endswith(".json"):
        path = arg if fam in ("gen", "spec") else spec
        obj = _load_json(path)
        if isinstance(obj, list):
            obj = {"family": "discrete_generator", "atoms": obj}
        norm = norm_from_dict(obj)
    else:
        raise UsageError(f"unrecognised --norm {spec!r}")

    if args.theta is not None:
        if not isinstance(norm, MarshallOlkinNorm):
            raise UsageError("--theta applies only to Marshall-Olkin norms")
        norm = MarshallOlkinNorm(norm.d, args.theta)
    if args.lam is not None:
        if not isinstance(norm, LambdaNorm):
            raise UsageError("--lambda applies only to lambda norms")
        norm = LambdaNorm(norm.d, args.lam)
    if d is not None and norm.d != d:
        raise UsageError(f"norm has dimension {norm.d} but --d/--gamma give {d}")
    return norm


def resolve_tail_ratios(args: argparse.Namespace, d: int) -> ex.TailRatios:
    gamma = _parse_floats(args.gamma, "--gamma") if args.gamma else [1.0] * d
    kappa = None if args.kappa is None else args.kappa - 1
    return ex.TailRatios.from_gamma(gamma, kappa)


def _context(norm: DNorm, tr: ex.TailRatios) -> dict[str, Any]:
    return {"norm": norm.to_dict(), "gamma": tr.gamma.tolist(), "kappa": tr.kappa + 1}


def _g(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_g(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_acdec(args: argparse.Namespace) -> tuple[int, str]:
    norm = resolve_norm(args)
    tr = resolve_tail_ratios(args, norm.d)
    res = ex.summary(norm, tr, args.m or 1)
    if args.format == "csv":
        rows = [[0, res["a"][0], None]] + [[k, res["a"][k], res["p"][k - 1]] for k in range(1, tr.d + 1)]
        return EXIT_OK, _csv(["k", "a", "p"], rows)
    return EXIT_OK, _json(res | _context(norm, tr))


def cmd_fi(args: argparse.Namespace) -> tuple[int, str]:
    norm = resolve_norm(args)
    tr = resolve_tail_ratios(args, norm.d)
    fi = ex.fragility_index(norm, tr)
    m = args.m or 1
    fim = ex.extended_fi(norm, tr, m)
    if fim is ex.UNDEFINED and not args.allow_undefined:
        raise _Undefined(f"FI({m}) is undefined: the limit mass of N_s >= {m} vanishes (use --allow-undefined)")
    value = None if fim is ex.UNDEFINED else fim
    if args.format == "csv":
        return EXIT_OK, _csv(["fi", "m", "fi_m"], [[fi, m, value]])
    return EXIT_OK, _json({"fi": fi, "fi_m": {"m": m, "value": value}} | _context(norm, tr))


def cmd_cluster(args: argparse.Namespace) -> tuple[int, str]:
    norm = resolve_norm(args)
    tr = resolve_tail_ratios(args, norm.d)
    dist = cl.cluster_pmf(norm, tr)
    if args.format == "csv":
        rows = [[k, dist.survival[k], dist.pmf[k], dist.cdf[k]] for k in range(dist.max_length + 1)]
        return EXIT_OK, _csv(["k", "survival", "pmf", "cdf"], rows)
    ctx = _context(norm, tr)
    ctx.pop("kappa")
    return EXIT_OK, _json(dist.to_dict() | ctx)


def cmd_vanishes(args: argparse.Namespace) -> tuple[int, str]:
    norm = resolve_norm(args)
    tr = resolve_tail_ratios(args, norm.d)
    m = args.m or 1
    res = ex.tail_mass_vanishes(norm, tr, m)
    witness = None if res.witness is None else [i + 1 for i in res.witness]
    if args.format == "csv":
        return EXIT_OK, _csv(["m", "result", "witness"], [[m, res.result, " ".join(map(str, witness or []))]])
    return EXIT_OK, _json({"m": m, "result": res.result, "witness": witness} | _context(norm, tr))


def _sweep(args: argparse.Namespace) -> sim.SweepTable:
    if not args.model:
        raise UsageError("--model is required")
    model = sim.model_from_dict(_load_json(args.model))
    qs = _parse_floats(args.quantiles, "--quantiles") if args.quantiles is not None else [0.999]
    return sim.convergence_sweep(model, qs, args.n or 100_000, args.seed)


def cmd_simulate(args: argparse.Namespace) -> tuple[int, str]:
    table = _sweep(args)
    if args.format == "csv":
        return EXIT_OK, table.to_csv()
    return EXIT_OK, _json(table.to_dict())


def cmd_sweep(args: argparse.Namespace) -> tuple[int, str]:
    table = _sweep(args)
    if args.format == "json":
        return EXIT_OK, _json(table.to_dict())
    return EXIT_OK, table.to_csv()


class _Undefined(Exception):
    pass


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


COMMANDS = {
    "acdec": cmd_acdec,
    "fi": cmd_fi,
    "cluster": cmd_cluster,
    "vanishes": cmd_vanishes,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--norm", default="max", help="lambda:<l> | max | mo:<theta> | iid_uniform | xi | mc:<sampler> | gen:<path> | <spec>.json")
    common.add_argument("--gamma", help="comma-separated tail ratios (default all ones)")
    common.add_argument("--d", type=int, help="dimension, when --gamma is not given")
    common.add_argument("--kappa", type=int, help="1-based pivot / cluster start index")
    common.add_argument("--m", type=int, help="threshold count for FI(m) and the vanishing test")
    common.add_argument("--theta", type=float, help="override the Marshall-Olkin parameter")
    common.add_argument("--lambda", dest="lam", type=float, help="override the lambda-norm exponent")
    common.add_argument("--model", help="model spec JSON (simulate, sweep)")
    common.add_argument("--quantiles", help="comma-separated F_kappa quantile levels")
    common.add_argument("--n", type=int, help="replicates (simulation) or Monte-Carlo generator draws")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--allow-undefined", action="store_true", help="emit null for an undefined FI(m)")

    parser = argparse.ArgumentParser(prog="fragility", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command == "sweep" else "json"
    try:
        status, text = COMMANDS[args.command](args)
    except _Undefined as exc:
        print(f"fragility: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except (UsageError, DNormError, ArithmeticError, KeyError, TypeError, ValueError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing field {exc}"
        print(f"fragility: {msg}", file=sys.stderr)
        return EXIT_INVALID
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"fragility: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_INVALID
    else:
        sys.stdout.write(text)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
