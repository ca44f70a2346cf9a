"""``binary-lottery`` command line.

Exit codes: 0 success, 1 verification failure, 2 IO or shape error,
3 configuration error.  Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import io
from .construct import build_network, plan_network, worst_case_network
from .embed import (EmbedFailure, embed_with_retries, failure_rate_mc, min_width_factor,
                    strong_lth_pipeline, substream_seed)
from .expressivity import check_separation
from .network import IntegerNetwork, ShapeError, TargetNetwork, prune_dead
from .precision import required_precision, scale_to_integer, truncate_network
from .verify import Realisation, certify_epsilon, size_accounting, verify_exact

EXIT_OK, EXIT_VERIFY, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3
DEFAULT_EPS = "1/10"
DEFAULT_DELTA = 0.1
EXAMPLE = "@example"


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int, **extra):
        super().__init__(message)
        self.kind, self.code, self.extra = kind, code, extra

    def to_json(self) -> dict:
        return {"error": self.kind, "message": str(self), **self.extra}


def _config(message: str) -> CliError:
    return CliError("config", message, EXIT_CONFIG)


@dataclass(frozen=True)
class RunConfig:
    command: str
    eps: Fraction | None
    delta: float
    seed: int
    k: int | None
    trials: int
    jobs: int
    backend: str

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        eps = None
        if getattr(args, "eps", None) is not None:
            try:
                eps = Fraction(args.eps)
            except (ValueError, ZeroDivisionError):
                raise _config(f"eps must be a rational string, got {args.eps!r}") from None
            if not 0 < eps < 1:
                raise _config(f"eps must lie in (0, 1), got {eps}")
        delta = getattr(args, "delta", DEFAULT_DELTA)
        if not 0 < delta < 1:
            raise _config(f"delta must lie in (0, 1), got {delta}")
        seed = getattr(args, "seed", 0)
        if not 0 <= seed < 2**64:
            raise _config("seed must be an unsigned 64-bit integer")
        k = getattr(args, "k", None)
        if k is not None and k < 1:
            raise _config("k must be at least 1")
        trials = getattr(args, "trials", 1)
        if trials < 1:
            raise _config("trials must be at least 1")
        jobs = getattr(args, "jobs", 1)
        if jobs < 1:
            raise _config("jobs must be at least 1")
        return cls(args.command, eps, delta, seed, k, trials, jobs,
                   getattr(args, "backend", "float"))


# --------------------------------------------------------------------------
# File helpers
# --------------------------------------------------------------------------

def _load(path: str, what: str):
    if path == EXAMPLE:
        path = io.example_target_path()
    try:
        return io.read_json(path)
    except FileNotFoundError:
        raise CliError("io", f"{what} file not found: {path}", EXIT_IO) from None
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError("io", f"cannot read {what} file {path}: {exc}", EXIT_IO) from None


def _parse(doc, parser, what: str):
    try:
        return parser(doc)
    except ShapeError as exc:
        raise CliError("shape", f"{what}: {exc}", EXIT_IO) from None
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise CliError("io", f"malformed {what}: {exc}", EXIT_IO) from None


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError("io", f"cannot create output directory {out}: {exc}", EXIT_IO) from None
    return out


def _target(path: str):
    return _parse(_load(path, "target"), io.network_from_json, "target")


def _real_inputs(f: TargetNetwork, eps: Fraction):
    spec = required_precision(f.max_width, f.depth, eps)
    truncated, report = truncate_network(f, spec)
    return spec, report, scale_to_integer(truncated, spec.p)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_construct(args, cfg: RunConfig) -> int:
    target = _target(args.target)
    out = _out_dir(args.out)
    if isinstance(target, IntegerNetwork):
        result = build_network(target)
        cert = verify_exact(target, result.binary, result.masks, seed=cfg.seed)
        io.write_json(out / "binary.json", io.network_to_json(result.binary))
        io.write_json(out / "masks.json", io.masks_to_json(result.masks), compact=True)
        io.write_json(out / "plan.json", result.plan.to_json(), compact=True)
        io.write_json(out / "size.json", size_accounting(result).to_json())
        io.write_json(out / "certificate.json", cert.to_json())
        return EXIT_OK if cert.passed else EXIT_VERIFY
    if isinstance(target, TargetNetwork):
        _check_norm(target)
        return _run_pipeline(target, cfg, out)
    raise CliError("io", "construct needs a target or integer network", EXIT_IO)


def _check_norm(f: TargetNetwork) -> None:
    try:
        f.check_norm_bound()
    except ValueError as exc:
        raise _config(str(exc)) from None


def _run_pipeline(f: TargetNetwork, cfg: RunConfig, out: Path) -> int:
    eps = cfg.eps if cfg.eps is not None else Fraction(DEFAULT_EPS)
    try:
        res = strong_lth_pipeline(f, eps, cfg.delta, cfg.seed, k=cfg.k)
    except EmbedFailure as exc:
        raise CliError("embed", str(exc), EXIT_VERIFY, failure=exc.to_json()) from None
    eps_cert = certify_epsilon(f, res, seed=substream_seed(cfg.seed, "corroboration"),
                               backend=cfg.backend)
    io.write_json(out / "binary.json", io.network_to_json(res.binary))
    io.write_json(out / "masks.json", io.masks_to_json(res.masks), compact=True)
    io.write_json(out / "plan.json", res.construction.plan.to_json(), compact=True)
    io.write_json(out / "integer.json", io.network_to_json(res.integer))
    io.write_json(out / "embed.json", res.embedding.to_json(), compact=True)
    io.write_json(out / "precision.json", {
        **res.precision.to_json(),
        "last_layer_scale": str(res.last_layer_scale),
        "formula_scale": str(res.formula_scale),
    })
    io.write_json(out / "truncation.json", res.truncation.to_json())
    io.write_json(out / "size.json",
                  size_accounting(res, eps=eps, delta=cfg.delta).to_json())
    io.write_json(out / "certificate.json", res.certificates["exact"].to_json())
    io.write_json(out / "epsilon.json", eps_cert.to_json())
    ok = res.certificates["exact"].passed and eps_cert.passed and eps_cert.bound <= eps
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_embed(args, cfg: RunConfig) -> int:
    target = _target(args.target)
    out = _out_dir(args.out)
    if isinstance(target, TargetNetwork):
        _check_norm(target)
        return _run_pipeline(target, cfg, out)
    if not isinstance(target, IntegerNetwork):
        raise CliError("io", "embed needs a target or integer network", EXIT_IO)
    plan = plan_network(target)
    k = cfg.k if cfg.k is not None else min_width_factor(
        max(target.widths), target.depth, plan.weight_bound, cfg.delta)
    try:
        host, result = embed_with_retries(plan, k, cfg.seed, delta=cfg.delta,
                                          scale=target.output_scale)
    except EmbedFailure as exc:
        io.write_json(out / "embed.json", {"success": False, "k": k,
                                           "failure": exc.to_json()})
        raise CliError("embed", str(exc), EXIT_VERIFY, failure=exc.to_json()) from None
    masks = prune_dead(result.masks)
    cert = verify_exact(target, host, masks, seed=cfg.seed)
    io.write_json(out / "binary.json", io.network_to_json(host))
    io.write_json(out / "masks.json", io.masks_to_json(masks), compact=True)
    io.write_json(out / "plan.json", plan.to_json(), compact=True)
    io.write_json(out / "embed.json", result.to_json(), compact=True)
    io.write_json(out / "certificate.json", cert.to_json())
    return EXIT_OK if cert.passed else EXIT_VERIFY


def cmd_verify(args, cfg: RunConfig) -> int:
    target = _target(args.target)
    binary = _parse(_load(args.binary, "binary"), io.network_from_json, "binary")
    masks = _parse(_load(args.masks, "masks"), io.masks_from_json, "masks")
    try:
        masks.check_congruent(binary)
    except ShapeError as exc:
        raise CliError("shape", str(exc), EXIT_IO) from None
    if isinstance(target, TargetNetwork):
        _check_norm(target)
        eps = cfg.eps if cfg.eps is not None else Fraction(DEFAULT_EPS)
        _, report, integer = _real_inputs(target, eps)
    elif isinstance(target, IntegerNetwork):
        integer, report = target, None
    else:
        raise CliError("io", "verify needs a target or integer network as --target", EXIT_IO)
    try:
        exact = verify_exact(integer, binary, masks, seed=cfg.seed)
    except ValueError as exc:
        raise CliError("shape", str(exc), EXIT_IO) from None
    cert = exact
    if report is not None and exact.passed:
        cert = certify_epsilon(target, Realisation(binary, masks, exact), report,
                               seed=substream_seed(cfg.seed, "corroboration"),
                               backend=cfg.backend)
    doc = cert.to_json()
    if args.out:
        out = _out_dir(args.out)
        io.write_json(out / "certificate.json", doc)
        if cert is not exact:
            io.write_json(out / "exact.json", exact.to_json())
    sys.stdout.write(io.dumps(doc))
    if not cert.passed:
        return EXIT_VERIFY
    if report is not None and cert.bound > eps:
        return EXIT_VERIFY
    return EXIT_OK


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

SIZE_COLUMNS = ("d0", "d1", "l", "W", "max_width", "depth", "parameters",
                "kept_weights", "max_layer_ratio", "width_over_construction_formula")
FAILURE_COLUMNS = ("d", "l", "W", "delta", "k", "trials", "failures",
                   "ci_low", "ci_high", "analytic_bound")


def _rect_network(d0: int, d1: int, l: int, W: int) -> IntegerNetwork:
    sq = worst_case_network(d1, 1, W).layers[0]
    first = worst_case_network(max(d0, d1), 1, W).layers[0][:d1, :d0]
    return IntegerNetwork((first,) + (sq,) * (l - 1), W)


def _size_row(key) -> list[str]:
    d0, d1, l, W = key
    rep = size_accounting(build_network(_rect_network(d0, d1, l, W)))
    return [str(d0), str(d1), str(l), str(W)] + rep.csv_row()


def _failure_row(key, delta: float, trials: int, seed: int, k_override) -> list[str]:
    d, l, W, k = key
    plan = plan_network(worst_case_network(d, l, W))
    if k is None:
        k = k_override if k_override is not None else min_width_factor(d, l, W, delta)
    return failure_rate_mc(plan, k, trials, seed, delta=delta).csv_row()


def _done_keys(path: Path, columns, width: int) -> set:
    if not path.exists() or path.stat().st_size == 0:
        return set()
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != tuple(columns):
        raise CliError("io", f"{path} exists with a different header", EXIT_IO)
    return {tuple(r[:width]) for r in rows[1:] if len(r) == len(columns)}


def cmd_sweep(args, cfg: RunConfig) -> int:
    path = Path(args.out)
    if args.mode == "size":
        columns = SIZE_COLUMNS
        grid = [(d0, d1, args.l, W) for d0 in args.d0 for d1 in args.d1 for W in args.W]
        key_of = lambda g: tuple(str(v) for v in g)  # noqa: E731
        work = _size_row
        extra = ()
    else:
        columns = FAILURE_COLUMNS
        ks = args.k_list or [cfg.k]
        grid = [(d, args.l, W, k) for d in args.d for W in args.W for k in ks]
        # the key is completed once k is known, so resolve it up front
        grid = [(d, l, W, k if k is not None else min_width_factor(d, l, W, cfg.delta))
                for d, l, W, k in grid]
        key_of = lambda g: (str(g[0]), str(g[1]), str(g[2]), repr(float(cfg.delta)),
                            str(g[3]))  # noqa: E731
        work = _failure_row
        extra = (cfg.delta, cfg.trials, cfg.seed, cfg.k)
    for v in [args.l] + list(getattr(args, "d0", []) or []) + list(getattr(args, "d1", []) or []) \
            + list(getattr(args, "d", []) or []) + list(args.W):
        if v < 1:
            raise _config("grid values must be positive integers")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        done = _done_keys(path, columns, len(key_of(grid[0])) if grid else 0)
        todo = [g for g in grid if key_of(g) not in done]
        new_file = not path.exists() or path.stat().st_size == 0
        with path.open("a", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if new_file:
                writer.writerow(columns)
                fh.flush()
            if cfg.jobs > 1 and len(todo) > 1:
                with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                    rows = pool.map(work, todo, *[[e] * len(todo) for e in extra])
                    for row in rows:
                        writer.writerow(row)
                        fh.flush()
            else:
                for g in todo:
                    writer.writerow(work(g, *extra))
                    fh.flush()
    except OSError as exc:
        raise CliError("io", f"cannot write {path}: {exc}", EXIT_IO) from None
    return EXIT_OK


def cmd_separation(args, cfg: RunConfig) -> int:
    for d in args.d:
        if d < 1:
            raise _config("d must be at least 1")
    verdicts = [check_separation(d, enumerate_up_to=args.enumerate_up_to) for d in args.d]
    text = "".join(json.dumps(v, sort_keys=True, separators=(",", ":")) + "\n" for v in verdicts)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise CliError("io", f"cannot write {args.out}: {exc}", EXIT_IO) from None
    sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _config(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="binary-lottery",
                description="Build, embed and verify pruned random binary ReLU networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, target=True):
        if target:
            sp.add_argument("--target", required=True,
                            help=f"target network JSON, or {EXAMPLE} for the bundled one")
        sp.add_argument("--eps", help="error target as a rational string, e.g. 1/100")
        sp.add_argument("--delta", type=float, default=DEFAULT_DELTA)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--k", type=int, default=None, help="width factor override")
        sp.add_argument("--backend", choices=("float", "rational"), default="float",
                        help="evaluation of sampled corroboration points")

    sp = sub.add_parser("construct", help="build a construction and certify it")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("embed", help="embed a target into a random binary network")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("verify", help="certify a masked binary network against a target")
    common(sp)
    sp.add_argument("--binary", required=True)
    sp.add_argument("--masks", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="size or failure-rate sweeps written to CSV")
    common(sp, target=False)
    sp.add_argument("--mode", choices=("size", "failure"), required=True)
    sp.add_argument("--out", required=True, help="CSV path; existing rows are kept")
    sp.add_argument("--W", type=int, nargs="*", default=[])
    sp.add_argument("--d", type=int, nargs="*", default=[], help="widths (failure mode)")
    sp.add_argument("--d0", type=int, nargs="*", default=[], help="input widths (size mode)")
    sp.add_argument("--d1", type=int, nargs="*", default=[], help="layer widths (size mode)")
    sp.add_argument("--l", type=int, default=1)
    sp.add_argument("--k-list", type=int, nargs="*", default=[], dest="k_list")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("separation", help="pruned vs unpruned expressivity verdicts")
    sp.add_argument("--d", type=int, nargs="+", required=True)
    sp.add_argument("--enumerate-up-to", type=int, default=4, dest="enumerate_up_to")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_separation)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig.from_args(args)
        return args.func(args, cfg)
    except CliError as exc:
        sys.stderr.write(json.dumps(exc.to_json(), sort_keys=True) + "\n")
        return exc.code
    except ShapeError as exc:
        sys.stderr.write(json.dumps({"error": "shape", "message": str(exc)}) + "\n")
        return EXIT_IO
    except ValueError as exc:
        sys.stderr.write(json.dumps({"error": "config", "message": str(exc)}) + "\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
