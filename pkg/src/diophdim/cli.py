"""Command-line entry point: ``diophdim <command> ...``.

Every command writes its artifacts plus a run record (``<out>.run.json``, or
``run.json`` inside the pipeline directory) holding the config snapshot, seed,
version and sha256 of each output.  Artifact bytes depend only on the config
and seed; wall time lives in the run record alone.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bestapprox import (
    BestApproxSequence,
    audit_best_approximations,
    best_approx_sequence,
)
from .cantor import (
    CantorConfig,
    MassMeasure,
    build_tree,
    dumps,
    load_tree,
    select_subsequence,
    verify_lemma2,
    verify_membership,
    verify_structure,
)
from .dimension import box_count, dim_estimate, dyadic_grid, report_decimal
from .errors import DiophError, IndexOutOfRange, UsageError
from .exponents import (
    DualForm,
    check_transfer,
    geometric_grid,
    omega_hat_column,
    omega_hat_row,
    omega_inhom,
    random_dyadic_betas,
)
from .lattice import BallQuery, build_lattice, count_gamma_in_ball, lemma1_bound, reduce_basis
from .numeric import TargetVector


def _rat(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# run records


@dataclass
class RunRecord:
    command: str
    config: dict
    version: str = __version__
    seed: int | None = None
    wall_time: float = 0.0
    outputs: list[dict] = field(default_factory=list)
    anomalies: list[str] = field(default_factory=list)
    error: dict | None = None

    def add_output(self, path: Path, data: bytes) -> None:
        self.outputs.append({"path": str(path), "sha256": hashlib.sha256(data).hexdigest()})

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "seed": self.seed,
            # the one non-artifact number; excluded from the determinism contract
            "wall_time_seconds": f"{self.wall_time:.3f}",
            "outputs": self.outputs,
            "anomalies": self.anomalies,
            "error": self.error,
        }


class _Writer:
    """Single writer for all artifacts of one run."""

    def __init__(self, record: RunRecord):
        self.record = record

    def text(self, path, content: str) -> None:
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        data = content.encode()
        path.write_bytes(data)
        self.record.add_output(path, data)

    def json(self, path, obj) -> None:
        self.text(path, dumps(obj))

    def csv(self, path, header, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _int_expr(text: str) -> int:
    """Integers, also written as 10**6 or 1e6."""
    t = text.strip().replace("^", "**")
    try:
        if "**" in t:
            b, e = t.split("**")
            return int(b) ** int(e)
        if "e" in t.lower():
            return int(Fraction(t))
        return int(t)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc


def _rat_list(text: str) -> tuple[Fraction, ...]:
    return tuple(_fraction(p) for p in text.split(","))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(_int_expr(p) for p in text.split(","))


def _common(p):
    p.add_argument("--error-json", action="store_true", help="print failures as JSON on stderr")
    p.add_argument("--record", help="run-record path (default: derived from --out)")
    p.add_argument("--config", help="JSON file of flag defaults; command-line flags override")


def _tree_flags(p, levels_required=True):
    p.add_argument("--alpha", required=True)
    p.add_argument("--v", type=_fraction, required=True)
    p.add_argument("--s", type=_fraction, required=True)
    p.add_argument("--levels", type=int, required=levels_required, default=1)
    p.add_argument("--mode", choices=("strict", "relaxed"), default="relaxed")
    p.add_argument("--k-list", type=_int_list)
    p.add_argument("--safety", type=_fraction, default=Fraction(1))
    p.add_argument("--min-children", type=int, default=2)
    p.add_argument("--qmax", type=_int_expr, default=10**7)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="diophdim", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("bestapprox", help="best simultaneous approximation denominators")
    p.add_argument("--alpha", required=True)
    p.add_argument("--qmax", type=_int_expr, required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("lattice", help="the lattice of one best approximation")
    p.add_argument("--seq", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--minima", action="store_true")
    p.add_argument("--count", action="store_true")
    p.add_argument("--center", type=_rat_list)
    p.add_argument("--radius", type=_fraction)
    p.add_argument("--mode", choices=("exact", "fast"), default="exact")
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("exponents", help="finite-scale exponent estimates")
    p.add_argument("kind", choices=("uniform-column", "uniform-row", "inhom", "transfer"))
    p.add_argument("--alpha", required=True)
    p.add_argument("--beta")
    p.add_argument("--qmax", type=_int_expr, default=10**6)
    p.add_argument("--Qmax", type=_int_expr, default=300)
    p.add_argument("--grid-points", type=int, default=12)
    p.add_argument("--betas", type=int, default=20, help="number of random beta (transfer)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    _common(p)

    p = sub.add_parser("cantor", help="build or verify a Cantor tree")
    csub = p.add_subparsers(dest="action", parser_class=_Parser, required=True)
    b = csub.add_parser("build")
    _tree_flags(b)
    b.add_argument("--out", required=True)
    _common(b)
    v = csub.add_parser("verify")
    v.add_argument("check", choices=("membership", "lemma2", "structure"))
    v.add_argument("--tree", required=True)
    v.add_argument("--samples", type=_int_expr, default=10**4)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", required=True)
    _common(v)

    p = sub.add_parser("dimension", help="box-counting slope over the tree window")
    p.add_argument("--tree", required=True)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--out", required=True, help="CSV path; the summary goes next to it")
    _common(p)

    p = sub.add_parser("verify", help="run every certificate on a tree or sequence")
    p.add_argument("--tree")
    p.add_argument("--seq")
    p.add_argument("--q-limit", type=_int_expr, default=10**4)
    p.add_argument("--samples", type=_int_expr, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("pipeline", help="sequence, tree, certificates and dimension in one run")
    _tree_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=_int_expr, default=10**4)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--outdir", default="pipeline-out")
    _common(p)
    return top


def _splice_config(argv: list[str]) -> list[str]:
    """Insert flags from --config FILE before the user's own flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a file")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    extra = []
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if val is True:
            extra.append(flag)
        elif val is False or val is None:
            continue
        else:
            extra += [flag, ",".join(map(str, val)) if isinstance(val, list) else str(val)]
    # first non-flag tokens name the (sub)command
    head = 0
    while head < len(rest) and not rest[head].startswith("-"):
        head += 1
    return rest[:head] + extra + rest[head:]


def _snapshot(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("error_json", "record"):
            continue
        if isinstance(v, Fraction):
            v = _rat(v)
        elif isinstance(v, tuple):
            v = [_rat(x) if isinstance(x, Fraction) else x for x in v]
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# commands


def _cantor_config(args) -> CantorConfig:
    return CantorConfig(
        v=args.v, s=args.s, J=args.levels, mode=args.mode, safety=args.safety,
        min_children=args.min_children, k_list=args.k_list,
    )


def cmd_bestapprox(args, w: _Writer):
    seq = best_approx_sequence(TargetVector.parse(args.alpha), args.qmax)
    w.json(args.out, seq.to_json())


def _load_seq(path) -> BestApproxSequence:
    with open(path) as fh:
        return BestApproxSequence.from_json(json.load(fh))


def cmd_lattice(args, w: _Writer):
    seq = _load_seq(args.seq)
    if not 0 <= args.k < len(seq.records):
        raise IndexOutOfRange(f"k = {args.k} outside 0..{len(seq.records) - 1}")
    L = build_lattice(seq.records[args.k])
    out = {"k": args.k, "lattice": L.to_json(), "lll": [[_rat(Fraction(x, L.q)) for x in row] for row in L.lll]}
    if args.minima or args.count:
        m = L.minima
        out["minima"] = {
            "values": [_rat(x) for x in m.values],
            "witnesses": [[_rat(x) for x in v] for v in m.witnesses],
        }
        rb = reduce_basis(L)
        out["reduced_basis"] = {
            "vectors": [[_rat(x) for x in v] for v in rb.vectors],
            "ratios": [_rat(x) for x in rb.ratios],
            "c_red": _rat(rb.c_red),
            "orthogonality": _rat(rb.orthogonality),
            "samples": rb.samples,
        }
    if args.count:
        if args.center is None or args.radius is None:
            raise UsageError("--count needs --center and --radius")
        if len(args.center) != seq.n:
            raise UsageError(f"--center needs {seq.n} coordinates")
        try:
            query = BallQuery(args.center, args.radius)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        res = count_gamma_in_ball(seq, args.k, query, mode=args.mode, witnesses=True)
        bound = lemma1_bound(L, query.radius)
        out["count"] = {
            "center": [_rat(x) for x in query.center],
            "radius": _rat(query.radius),
            "mode": res.mode,
            "lower": res.lower,
            "upper": res.upper,
            "witnesses": res.witnesses,
            "bound": _rat(bound.value),
            "bound_alternative": _rat(bound.alternative),
            "regime": bound.regime,
        }
    w.json(args.out, out)


def cmd_exponents(args, w: _Writer):
    A = TargetVector.parse(args.alpha)
    if args.kind == "uniform-column":
        est = omega_hat_column(best_approx_sequence(A, args.qmax))
        out, rows, header = est.to_json(), est.csv_rows(), ("q", "lo", "hi")
    elif args.kind == "uniform-row":
        est = omega_hat_row(DualForm.of(A), geometric_grid(2, args.Qmax, args.grid_points))
        out, rows, header = est.to_json(), est.csv_rows(), ("Q", "lo", "hi")
    elif args.kind == "inhom":
        if not args.beta:
            raise UsageError("inhom needs --beta")
        est = omega_inhom(A, args.beta, args.qmax)
        out, rows, header = est.to_json(), est.csv_rows(), ("q", "lo", "hi")
    else:
        betas = random_dyadic_betas(A.dim, args.betas, args.seed)
        rep = check_transfer(A, betas, args.qmax, args.Qmax, args.grid_points)
        out = rep.to_json() | {"seed": args.seed, "generator": "python-random-mt19937"}
        header = ("index", "beta", "lo", "hi", "passed")
        rows = []
        for i, (b, e, ok) in enumerate(zip(rep.betas, rep.estimates, rep.passed)):
            lo, hi = e.estimate.round_out(64).to_strings() if e.estimate is not None else ("", "")
            rows.append((i, b, lo, hi, "" if ok is None else str(ok).lower()))
        w.record.anomalies += [f"beta {i}: {a}" for i, e in enumerate(rep.estimates) for a in e.anomalies]
    w.json(args.out, out)
    if args.csv:
        w.csv(args.csv, header, rows)
    if args.kind != "transfer":
        w.record.anomalies += list(est.anomalies)


def _tree_from_args(args):
    A = TargetVector.parse(args.alpha)
    config = _cantor_config(args)
    seq = best_approx_sequence(A, args.qmax)
    steps = select_subsequence(seq, config)
    return seq, build_tree(seq, config, steps)


def cmd_cantor(args, w: _Writer):
    if args.action == "build":
        _, tree = _tree_from_args(args)
        w.json(args.out, tree.to_json())
        return
    tree = load_tree(args.tree)
    w.record.seed = args.seed
    w.json(args.out, _verify_one(tree, args.check, args.samples, args.seed))


def _verify_one(tree, check: str, samples: int, seed: int) -> dict:
    if check == "membership":
        return verify_membership(tree).to_json()
    if check == "structure":
        return verify_structure(tree).to_json()
    M = MassMeasure.from_counts([lv.N for lv in tree.levels])
    return verify_lemma2(tree, M, samples, seed).to_json()


def _dimension_tables(tree, grid_points):
    grid = dyadic_grid(tree.radius(tree.depth).hi, tree.radius(0).lo, grid_points)
    samples = box_count(tree, grid)
    rows = []
    for r, N in samples:
        rows.append((_rat(r), N, report_decimal(math.log(N)), report_decimal(math.log(1 / r))))
    try:
        est = dim_estimate(samples).to_json()
    except DiophError as exc:
        est = {"error": type(exc).__name__, "message": str(exc)}
    summary = {
        "estimate": est,
        "window": [list(tree.radius(j).round_out(64).to_strings()) for j in (tree.depth, 0)],
        "grid": [_rat(r) for r in grid],
        "target_s": _rat(tree.config.s),
        "target_inv_v": _rat(1 / tree.config.v),
    }
    return rows, summary


def _summary_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".summary.json")


def cmd_dimension(args, w: _Writer):
    tree = load_tree(args.tree)
    rows, summary = _dimension_tables(tree, args.grid_points)
    w.csv(args.out, ("r", "N", "logN", "log_inv_r"), rows)
    w.json(_summary_path(args.out), summary)


def cmd_verify(args, w: _Writer):
    if not args.tree and not args.seq:
        raise UsageError("verify needs --tree and/or --seq")
    out = {}
    if args.seq:
        out["best_approximations"] = audit_best_approximations(_load_seq(args.seq), args.q_limit).to_json()
    if args.tree:
        tree = load_tree(args.tree)
        w.record.seed = args.seed
        for check in ("structure", "membership", "lemma2"):
            out[check] = _verify_one(tree, check, args.samples, args.seed)
    w.json(args.out, out)


def cmd_pipeline(args, w: _Writer):
    d = Path(args.outdir)
    w.record.seed = args.seed
    A = TargetVector.parse(args.alpha)
    config = _cantor_config(args)
    seq = best_approx_sequence(A, args.qmax)
    w.json(d / "seq.json", seq.to_json())
    steps = select_subsequence(seq, config)
    w.json(d / "selection.json", {"steps": [s.to_json() for s in steps]})
    tree = build_tree(seq, config, steps)
    w.json(d / "tree.json", tree.to_json())
    report = {c: _verify_one(tree, c, args.samples, args.seed) for c in ("structure", "membership", "lemma2")}
    w.json(d / "verify.json", report)
    rows, summary = _dimension_tables(tree, args.grid_points)
    w.csv(d / "dims.csv", ("r", "N", "logN", "log_inv_r"), rows)
    w.json(d / "dims.summary.json", summary)


HANDLERS = {
    "bestapprox": cmd_bestapprox,
    "lattice": cmd_lattice,
    "exponents": cmd_exponents,
    "cantor": cmd_cantor,
    "dimension": cmd_dimension,
    "verify": cmd_verify,
    "pipeline": cmd_pipeline,
}


def _record_path(args) -> Path:
    if args.record:
        return Path(args.record)
    if args.command == "pipeline":
        return Path(args.outdir) / "run.json"
    return Path(args.out + ".run.json")


def _report(exc: BaseException, as_json: bool, stream) -> dict:
    err = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("required", "ball", "level", "parent", "found", "needed"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    if as_json:
        print(json.dumps(err, sort_keys=True), file=stream)
    else:
        print(f"{err['error']}: {err['message']}", file=stream)
    return err


def run(argv: list[str] | None = None, stderr=None) -> tuple[int, RunRecord | None]:
    """Execute one command; returns (exit status, run record)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    stderr = stderr or sys.stderr
    as_json = "--error-json" in argv
    try:
        args = build_parser().parse_args(_splice_config(argv))
    except UsageError as exc:
        _report(exc, as_json, stderr)
        return 2, None
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0), None
    record = RunRecord(command=args.command, config=_snapshot(args), seed=getattr(args, "seed", None))
    writer = _Writer(record)
    t0 = time.perf_counter()
    status = 0
    try:
        HANDLERS[args.command](args, writer)
    except UsageError as exc:
        _report(exc, as_json, stderr)
        return 2, None
    except DiophError as exc:
        record.error = _report(exc, as_json, stderr)
        status = 1
    record.wall_time = time.perf_counter() - t0
    path = _record_path(args)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record.to_json(), indent=1, sort_keys=True) + "\n")
    return status, record


def main(argv: list[str] | None = None) -> None:
    status, _ = run(argv)
    sys.exit(status)


if __name__ == "__main__":
    main()
