"""``zonedet`` command line: generate matrices, run the approximations, compare.

Exit codes:
    0  success
    2  usage error, unreadable or malformed input file
    3  singular diagonal block
    4  rho >= 1 while bounds were requested (the report is still written)
    5  Cholesky breakdown in the sparse-inverse approximation
    6  matrix order exceeds the dense oracle cap (ZONEDET_DENSE_CAP)
    7  fill-in of a power of M_D^{-1} M_off exceeded --nnz-cap
    8  odd-checkerboard self-check failed
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from pathlib import Path
from typing import Sequence, TextIO

from . import __version__
from .errors import (
    CheckerboardViolation,
    CholeskyBreakdown,
    DenseCapExceeded,
    MemoryBudgetExceeded,
    ParseError,
    PartitionMismatch,
    SingularBlock,
    UnsupportedFormat,
)
from .generators import GeneratorSpec, generate
from .oracle import dense_cap, dense_lu_logdet
from .sparsemat import (
    BlockPartition,
    ComplexSparseMatrix,
    LogDet,
    _wrap_phase,
    is_hermitian,
    read_matrix_market,
    write_matrix_market,
)
from .spaidet import hadamard_product_logdet, lower_neighbor_pattern, spai_logdet
from .zonedet import logdet_error, zone_expansion

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SINGULAR_BLOCK = 3
EXIT_RHO_GE_ONE = 4
EXIT_CHOLESKY = 5
EXIT_DENSE_CAP = 6
EXIT_NNZ_CAP = 7
EXIT_CHECKERBOARD = 8

JSON_SCHEMA = 1
REPORT_COLUMNS = (
    "p",
    "delta_re",
    "delta_im",
    "trace_re",
    "trace_im",
    "abs_log_bound",
    "rel_det_bound",
    "tight_rel_bound",
    "abs_err",
    "rel_err_logdet",
    "skipped",
)

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(rf"[+-]?{_NUM}|[+-]?(?:{_NUM})?[ij]|[+-]?{_NUM}[+-](?:{_NUM})?[ij]")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` style literals (``3``, ``-0.5i``, ``0+0.5i``, ``1-2j``)."""
    t = text.strip()
    if not _COMPLEX_RE.fullmatch(t):
        raise argparse.ArgumentTypeError(f"not a complex literal: {text!r}")
    t = t[:-1] + "j" if t[-1] in "ij" else t
    if t[-1] == "j" and (len(t) == 1 or t[-2] in "+-"):
        t = t[:-1] + "1j"
    return complex(t)


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return "%.10e" % x


def _json_num(x: float | None):
    if x is None or not math.isfinite(x):
        return None
    return x


def _load_matrix(path: str) -> ComplexSparseMatrix:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read {path}: {exc}") from None
    try:
        return read_matrix_market(text)
    except (ParseError, UnsupportedFormat) as exc:
        raise CliError(EXIT_USAGE, f"{path}: {exc}") from None


def _exact(M: ComplexSparseMatrix) -> LogDet:
    try:
        return dense_lu_logdet(M)
    except DenseCapExceeded as exc:
        raise CliError(EXIT_DENSE_CAP, str(exc)) from None


def _partition(args, n: int) -> BlockPartition:
    try:
        if args.block_offsets:
            offs = [int(x) for x in args.block_offsets.split(",") if x.strip()]
            part = BlockPartition(tuple(offs))
            if part.n != n:
                raise PartitionMismatch(f"offsets end at {part.n}, matrix order is {n}")
            return part
        return BlockPartition.uniform(n, args.block_size)
    except (PartitionMismatch, ValueError) as exc:
        raise CliError(EXIT_USAGE, f"bad block specification: {exc}") from None


def _rho_mode(text: str):
    if text in ("auto", "power", "gersh", "hermitian"):
        return text
    if text.startswith("value:"):
        try:
            v = float(text[len("value:"):])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad rho value in {text!r}") from None
        if not v >= 0:
            raise argparse.ArgumentTypeError("rho must be non-negative")
        return v
    raise argparse.ArgumentTypeError(
        f"--rho must be auto, power, gersh, hermitian or value:<x>, got {text!r}"
    )


def _write_table(out: TextIO, header: Sequence[str], rows: list[list[str]]) -> None:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    out.write("  ".join(h.rjust(w) for h, w in zip(header, widths)).rstrip() + "\n")
    for r in rows:
        out.write("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n")


# --- generate --------------------------------------------------------------

_GEN_PARAMS = ("m", "n", "a", "b", "k", "block_size", "coupling_scale", "seed", "dominance", "margin", "alpha")


def cmd_generate(args, out: TextIO) -> int:
    params = {}
    for name in _GEN_PARAMS:
        v = getattr(args, name)
        if v is not None:
            params[name] = v
    try:
        spec = GeneratorSpec(args.kind, params)
        M = generate(spec)
    except (KeyError, ValueError) as exc:
        missing = f"missing parameter --{str(exc).strip(chr(39)).replace('_', '-')}" if isinstance(exc, KeyError) else str(exc)
        raise CliError(EXIT_USAGE, missing) from None
    prov = spec.provenance()
    text = write_matrix_market(M, comments=[prov])
    herm = is_hermitian(M, 1e-10)
    summary = f"n={M.order} nnz={M.nnz} hermitian={'true' if herm else 'false'}\n% {prov}\n"
    if args.output:
        Path(args.output).write_text(text)
        out.write(summary)
    else:
        out.write(text)
        sys.stderr.write(summary)
    return EXIT_OK


# --- zone ------------------------------------------------------------------


def zone_rows(report, exact: LogDet | None) -> list[dict]:
    rows = []
    for p in range(report.order + 1):
        d = report.deltas[p]
        tr = report.traces[p - 1] if p > 0 else None
        b = report.bounds[p] if report.bounds else None
        err = rel = None
        if exact is not None:
            err = logdet_error(d, exact)
            scale = abs(complex(exact.ln_abs, exact.principal_phase))
            rel = err / scale if scale > 0 else None
        rows.append(
            {
                "p": p,
                "delta_re": d.real,
                "delta_im": _wrap_phase(d.imag),
                "trace_re": None if tr is None else tr.real,
                "trace_im": None if tr is None else tr.imag,
                "abs_log_bound": None if b is None else b.abs_log_bound,
                "rel_det_bound": None if b is None else b.rel_det_bound,
                "tight_rel_bound": None if b is None else b.tight_rel_bound,
                "abs_err": err,
                "rel_err_logdet": rel,
                "skipped": p in report.skipped_orders,
            }
        )
    return rows


def _emit_zone(out: TextIO, fmt: str, report, rows: list[dict], exact: LogDet | None) -> None:
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow(
                [r["p"]]
                + [_fmt(r[c]) for c in REPORT_COLUMNS[1:-1]]
                + ["1" if r["skipped"] else "0"]
            )
        return
    if fmt == "json":
        doc = {
            "schema": JSON_SCHEMA,
            "command": "zone",
            "n": report.n,
            "blocks": report.partition.k,
            "order": report.order,
            "rho": {
                "value": report.rho.value,
                "method": report.rho.method,
                "converged": report.rho.converged,
                "iterations": report.rho.iterations,
            },
            "c": _json_num(report.c),
            "lambda_min": report.lambda_min,
            "checkerboard": report.checkerboard,
            "skipped_orders": report.skipped_orders,
            "exact": None if exact is None else {"ln_abs": exact.ln_abs, "phase": exact.principal_phase},
            "rows": [
                {k: (_json_num(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows
            ],
        }
        out.write(json.dumps(doc, indent=2) + "\n")
        return
    rho = report.rho
    out.write(f"n = {report.n}, blocks = {report.partition.k}, order = {report.order}\n")
    out.write(
        f"rho = {rho.value:.6f} ({rho.method}{'' if rho.converged else ', not converged'})"
        + (f", c = {report.c:.6g}" if report.c is not None else ", bounds unavailable (rho >= 1)")
        + "\n"
    )
    out.write(f"checkerboard = {report.checkerboard}\n")
    if exact is not None:
        out.write(f"ln det(M) = {exact.ln_abs:.10g} {exact.principal_phase:+.10g}i\n")
    header = list(REPORT_COLUMNS)
    table = []
    for r in rows:
        table.append(
            [str(r["p"])]
            + [("%.6e" % r[c]) if r[c] is not None else "-" for c in REPORT_COLUMNS[1:-1]]
            + ["yes" if r["skipped"] else ""]
        )
    _write_table(out, header, table)


def cmd_zone(args, out: TextIO) -> int:
    M = _load_matrix(args.matrix)
    P = _partition(args, M.order)
    exact = _exact(M) if args.exact else None
    try:
        report = zone_expansion(M, P, args.order, args.rho, args.pivot_tol, nnz_cap=args.nnz_cap)
    except SingularBlock as exc:
        raise CliError(EXIT_SINGULAR_BLOCK, str(exc)) from None
    except MemoryBudgetExceeded as exc:
        raise CliError(EXIT_NNZ_CAP, str(exc)) from None
    except CheckerboardViolation as exc:
        raise CliError(EXIT_CHECKERBOARD, str(exc)) from None
    except DenseCapExceeded as exc:
        raise CliError(EXIT_DENSE_CAP, str(exc)) from None
    _emit_zone(out, args.format, report, zone_rows(report, exact), exact)
    if args.bounds and not report.bounds_available:
        sys.stderr.write(f"zonedet: rho = {report.rho.value:.6g} >= 1, error bounds unavailable\n")
        return EXIT_RHO_GE_ONE
    return EXIT_OK


# --- spai ------------------------------------------------------------------


def spai_summary(M: ComplexSparseMatrix, level: int, cap: int, exact: LogDet | None) -> dict:
    result = spai_logdet(M, lower_neighbor_pattern(M, level, cap))
    hadamard = hadamard_product_logdet(M)
    n = M.order
    doc = {
        "n": n,
        "level": level,
        "cap": cap,
        "ln_sigma": result.logdet.ln_abs,
        "ln_diag_product": hadamard.ln_abs,
        "ln_det": None,
        "rel_err_ln_sigma": None,
        "rel_err_root_sigma": None,
        "rel_err_ln_diag_product": None,
        "rel_err_root_diag_product": None,
    }
    if exact is not None:
        ld = exact.ln_abs
        doc["ln_det"] = ld
        for key, val in (("sigma", result.logdet.ln_abs), ("diag_product", hadamard.ln_abs)):
            doc[f"rel_err_ln_{key}"] = abs(val - ld) / abs(ld) if ld != 0 else None
            doc[f"rel_err_root_{key}"] = abs(math.expm1((val - ld) / n))
    return doc


def cmd_spai(args, out: TextIO) -> int:
    M = _load_matrix(args.matrix)
    exact = _exact(M) if args.exact else None
    try:
        doc = spai_summary(M, args.level, args.cap, exact)
    except CholeskyBreakdown as exc:
        raise CliError(EXIT_CHOLESKY, f"{exc} (index {exc.index})") from None
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    _emit_flat(out, args.format, "spai", doc)
    return EXIT_OK


def _emit_flat(out: TextIO, fmt: str, command: str, doc: dict) -> None:
    if fmt == "json":
        full = {"schema": JSON_SCHEMA, "command": command}
        full.update({k: (_json_num(v) if isinstance(v, float) else v) for k, v in doc.items()})
        out.write(json.dumps(full, indent=2) + "\n")
    elif fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(doc))
        w.writerow([_fmt(v) if isinstance(v, float) else ("" if v is None else str(v)) for v in doc.values()])
    else:
        width = max(len(k) for k in doc)
        for k, v in doc.items():
            shown = "-" if v is None else (f"{v:.10g}" if isinstance(v, float) else str(v))
            out.write(f"{k.ljust(width)}  {shown}\n")


# --- exact -----------------------------------------------------------------


def cmd_exact(args, out: TextIO) -> int:
    M = _load_matrix(args.matrix)
    ld = _exact(M)
    doc = {"n": M.order, "ln_abs": ld.ln_abs, "principal_phase": ld.principal_phase}
    if abs(ld.ln_abs) < 700:
        d = ld.det()
        doc["det_re"], doc["det_im"] = d.real, d.imag
    else:
        doc["det_re"] = doc["det_im"] = None
    if args.format == "text":
        out.write(f"n                {M.order}\n")
        out.write(f"ln_abs           {ld.ln_abs:.16g}\n")
        out.write(f"principal_phase  {ld.principal_phase:.16g}\n")
        if doc["det_re"] is not None:
            out.write(f"det              {doc['det_re']:.10e} {doc['det_im']:+.10e}i\n")
        else:
            out.write("det              (|ln_abs| >= 700, not printed)\n")
    else:
        _emit_flat(out, args.format, "exact", doc)
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zonedet",
        description="Zone determinant expansions and sparse-inverse log-determinant approximations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a test matrix in Matrix Market format")
    g.add_argument("--kind", required=True, help="laplacian2d, toeplitz, block_t3, checkerboard, "
                   "hpd_random, diag_dominant_random, example2x2")
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--a", type=float, help="Toeplitz diagonal (default 2)")
    g.add_argument("--b", type=float, help="Toeplitz off-diagonal (default -1)")
    g.add_argument("--k", type=int, help="number of checkerboard zones (even)")
    g.add_argument("--block-size", type=int)
    g.add_argument("--coupling-scale", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--dominance", type=float)
    g.add_argument("--margin", type=float)
    g.add_argument("--alpha", type=parse_complex, help="complex literal such as 0+0.5i")
    g.add_argument("-o", "--output", help="output file (default: standard output)")
    g.set_defaults(func=cmd_generate)

    fmt_kw = dict(choices=("csv", "json", "text"), default="text")

    z = sub.add_parser("zone", help="zone determinant expansion report")
    z.add_argument("--matrix", required=True)
    blocks = z.add_mutually_exclusive_group(required=True)
    blocks.add_argument("--block-size", type=int)
    blocks.add_argument("--block-offsets", help="comma-separated offsets, e.g. 0,2,5")
    z.add_argument("--order", type=int, default=2)
    z.add_argument("--rho", type=_rho_mode, default="auto",
                   help="auto, power, gersh, hermitian or value:<x>")
    z.add_argument("--exact", action="store_true", help="add errors against a dense LU")
    z.add_argument("--bounds", action=argparse.BooleanOptionalAction, default=True,
                   help="require error bounds (exit 4 when rho >= 1)")
    z.add_argument("--nnz-cap", type=int, help="fill-in cap for powers (default 64*nnz(M))")
    z.add_argument("--pivot-tol", type=float, default=1e-12)
    z.add_argument("--format", **fmt_kw)
    z.set_defaults(func=cmd_zone)

    s = sub.add_parser("spai", help="sparse-inverse approximation of ln det")
    s.add_argument("--matrix", required=True)
    s.add_argument("--level", type=int, default=1)
    s.add_argument("--cap", type=int, default=64)
    s.add_argument("--exact", action="store_true")
    s.add_argument("--format", **fmt_kw)
    s.set_defaults(func=cmd_spai)

    e = sub.add_parser("exact", help="dense LU log-determinant")
    e.add_argument("--matrix", required=True)
    e.add_argument("--format", **fmt_kw)
    e.set_defaults(func=cmd_exact)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "order", 0) < 0:
            parser.error("--order must be non-negative")
    except SystemExit as exc:  # usage errors, --help, --version
        return int(exc.code or 0)
    out = out if out is not None else sys.stdout
    # build the whole report first so a failure leaves no partial output
    buf = io.StringIO()
    try:
        code = args.func(args, buf)
    except CliError as exc:
        sys.stderr.write(f"zonedet: {exc}\n")
        return exc.code
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
