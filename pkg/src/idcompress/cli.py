"""``idcompress`` command line.

Exit codes: 0 success, 1 usage error, 2 numerical error (the error class
name is printed on stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import archive as arc
from .blocking import DEFAULT_STAGE2_TOL, PartitionPlan
from .bounds import DEFAULT_TAU_GRID, verify_bounds
from .datagen import (
    QOIS,
    TaylorGreenParams,
    even_split,
    gen_exact_rank,
    gen_locally_low_rank,
    gen_unstructured_grid,
    periodic_box,
    taylor_green_stream,
)
from .errors import BoundViolation, CompressionError
from .grid import GridGeom
from .metrics import quality_report
from .pipeline import StreamConfig, run_pipeline, second_pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _float_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected nonnegative numbers, got {text!r}")
    return vals


def _positive(kind):
    def parse(text):
        val = kind(text)
        if val <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text!r}")
        return val

    return parse


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="idcompress", description="Interpolative-decomposition compression of snapshot data.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="write reference snapshot data as raw frames plus a JSON sidecar")
    gsub = gen.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    tg = gsub.add_parser("taylor-green", help="analytic decaying Taylor-Green vortex")
    tg.add_argument("--grid", type=_int_list, default=[20, 20])
    tg.add_argument("--dt", type=_positive(float), default=0.1)
    tg.add_argument("--steps", type=_positive(int), default=100)
    tg.add_argument("--qoi", choices=QOIS, default="u1")
    tg.add_argument("--nu", type=_positive(float), default=0.1)
    tg.add_argument("--rho", type=_positive(float), default=1.0)
    tg.add_argument("--unstructured", action="store_true", help="sample at seeded random points instead")
    tg.add_argument("--seed", type=int, default=0)
    tg.add_argument("--out", required=True)

    syn = gsub.add_parser("synthetic", help="seeded matrix of exact or block-wise rank")
    kind = syn.add_mutually_exclusive_group(required=True)
    kind.add_argument("--rank", type=int)
    kind.add_argument("--block-ranks", type=_int_list)
    syn.add_argument("--rows", type=_positive(int), required=True)
    syn.add_argument("--cols", type=_positive(int), required=True)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True)

    cp = sub.add_parser("compress", help="stream raw frames through the two-stage compressor")
    cp.add_argument("--in", dest="inp", required=True)
    cp.add_argument("--meta", help="sidecar JSON (default: <in>.json)")
    cp.add_argument("--blocks", type=_int_list, default=[1])
    cp.add_argument("--chunk", type=_positive(int), default=25)
    cp.add_argument("--rank", type=_positive(int), default=1, help="stage-1 fixed rank")
    cp.add_argument("--tol", type=_positive(float), default=DEFAULT_STAGE2_TOL, help="stage-2 tolerance")
    cp.add_argument("--stride", type=_int_list, default=[1])
    cp.add_argument("--periodic", action="store_true", help="treat every grid axis as periodic")
    cp.add_argument("--no-boundary", action="store_true", help="do not force the last index into the sketch")
    cp.add_argument("--workers", type=_positive(int), default=os.cpu_count() or 1)
    cp.add_argument("--out", required=True)

    dp = sub.add_parser("decompress", help="reconstruct raw frames from an archive")
    dp.add_argument("--in", dest="inp", required=True)
    dp.add_argument("--out", required=True)

    ip = sub.add_parser("info", help="print archive metadata, ranks and size")
    ip.add_argument("--in", dest="inp", required=True)

    mp = sub.add_parser("metrics", help="compression factor and error against the original frames")
    mp.add_argument("--exact", required=True)
    mp.add_argument("--archive", required=True)

    vb = sub.add_parser("verify-bounds", help="check the SubID and SPID error bounds on seeded instances")
    vb.add_argument("--seed-count", type=_positive(int), default=20)
    vb.add_argument("--tau-grid", type=_float_list, default=list(DEFAULT_TAU_GRID))
    vb.add_argument("--strides", type=_int_list, default=[2, 3])
    vb.add_argument("--ranks", type=_int_list, default=[2, 5])
    vb.add_argument("--out", help="also write the JSON report here")
    return p


def cmd_gen(args) -> int:
    if args.kind == "taylor-green":
        if len(args.grid) != 2:
            raise UsageError("--grid needs two sizes for the 2-D vortex")
        if args.unstructured:
            geom = gen_unstructured_grid(args.grid[0] * args.grid[1], args.seed)
        else:
            geom = periodic_box(args.grid)
        params = TaylorGreenParams(geom, args.nu, args.rho, args.dt, args.steps, args.qoi)
        n = arc.write_frames(args.out, taylor_green_stream(params))
        arc.write_sidecar(_sidecar_path(args.out), geom, n, qoi=args.qoi, source="taylor-green",
                          dt=args.dt, nu=args.nu, rho=args.rho, seed=args.seed)
        return 0

    if args.rank is not None:
        if args.rank < 0:
            raise UsageError("--rank must be nonnegative")
        a = gen_exact_rank(args.rows, args.cols, args.rank, args.seed)
        extra = {"rank": args.rank}
    else:
        a = gen_locally_low_rank(even_split(args.rows, len(args.block_ranks)), args.block_ranks,
                                 args.cols, args.seed)
        extra = {"block_ranks": args.block_ranks}
    geom = GridGeom.structured([args.rows], min_points=1)
    n = arc.write_frames(args.out, a)
    arc.write_sidecar(_sidecar_path(args.out), geom, n, source="synthetic", seed=args.seed, **extra)
    return 0


def cmd_compress(args) -> int:
    meta = arc.read_sidecar(args.meta or _sidecar_path(args.inp))
    geom = GridGeom.from_dict(meta["grid"])
    if args.periodic and geom.is_structured:
        geom = GridGeom.structured(geom.dims, [True] * geom.ndim, geom.spacing, geom.origin, min_points=1)
    axes = geom.ndim if geom.is_structured else 1
    for name, vals in (("--blocks", args.blocks), ("--stride", args.stride)):
        if len(vals) not in (1, geom.ndim if name == "--blocks" else axes):
            raise UsageError(f"{name} needs 1 or {geom.ndim} values, got {len(vals)}")
    blocks = tuple(args.blocks) * (geom.ndim if len(args.blocks) == 1 else 1)
    config = StreamConfig(
        plan=PartitionPlan(geom, blocks, args.chunk),
        strides=tuple(args.stride),
        include_boundary=not args.no_boundary,
        stage1_rank=args.rank,
        stage2_tol=args.tol,
        workers=args.workers,
        qoi=str(meta.get("qoi", "")),
        provenance=str(meta.get("source", "")),
    )
    result = run_pipeline(arc.iter_frames(args.inp, geom.m), config)
    archive = result.archive
    if config.interp_recipe() == "none":
        archive = second_pass(archive, arc.iter_frames(args.inp, geom.m))
    data = arc.write_archive(archive, args.out)
    _emit({"out": str(args.out), "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest(),
           "ranks": archive.ranks})
    return 0


def cmd_decompress(args) -> int:
    archive = arc.read_archive(args.inp)
    approx = arc.decompress(archive)
    n = arc.write_frames(args.out, approx)
    arc.write_sidecar(_sidecar_path(args.out), archive.geom, n, qoi=archive.metadata.get("qoi", ""))
    return 0


def cmd_info(args) -> int:
    data = Path(args.inp).read_bytes()
    archive = arc.decode(data)
    _emit({
        "metadata": archive.metadata,
        "blocks": len(archive.blocks),
        "ranks": archive.ranks,
        "stored_entries": sum(b.stored_entries for b in archive.blocks),
        "bytes": len(data),
        "sha256": hashlib.sha256(data).hexdigest(),
    })
    return 0


def cmd_metrics(args) -> int:
    archive = arc.read_archive(args.archive)
    m = int(archive.metadata["m"])
    exact = arc.read_frames(args.exact, m)
    _emit(quality_report(exact, archive).to_dict())
    return 0


def cmd_verify_bounds(args) -> int:
    report = verify_bounds(args.seed_count, args.tau_grid, args.strides, args.ranks)
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    bad = report["thm1"]["violations"] + report["thm2"]["violations"]
    if bad:
        raise BoundViolation(f"{bad} bound violations")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "info": cmd_info,
    "metrics": cmd_metrics,
    "verify-bounds": cmd_verify_bounds,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except CompressionError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1


if __name__ == "__main__":
    sys.exit(main())
