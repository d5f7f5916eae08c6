"""Command-line front end.

Subcommands::

    paoneshot simulate  --T 50000 --p 0.5 --alpha 1 --seed 7 -o run
    paoneshot estimate  run.trace --method oneshot --M 200 -o est.csv
    paoneshot fit       est.csv --form alpha
    paoneshot diagnose  ratio|pi|pt ...

Every output carries an echo of the configuration that produced it.  The
thread count is left out of the echo, since results do not depend on it.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .estimators import (AttachmentEstimate, BinningScheme, OneshotConfig,
                         estimate_baseline, estimate_mle_full, estimate_oneshot,
                         estimate_oneshot_binned, estimate_pt_window, tail_ratio)
from .model_fit import asymptotic_pi, fit_alpha, fit_beta, fit_gamma
from .net_core import (DataError, NumericError, Snapshot, ingest_edge_list, read_histogram,
                       read_sequence, read_trace, write_histogram, write_trace)
from .sg_sim import (Constant, Linear, LogDamped, PowerLaw, Sequence, SGConfig,
                     replicate_seed, run_parallel, seed_sequence, simulate,
                     simulate_counts)

log = logging.getLogger("paoneshot")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --- helpers -------------------------------------------------------------------

@contextlib.contextmanager
def _open_out(path: str):
    """Text handle for ``path``; ``-`` is standard output."""
    if path == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    try:
        fh = open(path, "w", newline="\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None
    with fh:
        yield fh


def _echo_lines(fh, echo: dict):
    for key in sorted(echo):
        fh.write(f"# {key}={json.dumps(echo[key], sort_keys=True)}\n")


def _attachment(args):
    given = [x is not None for x in (args.alpha, args.beta, args.c)]
    if sum(given) > 1:
        raise UsageError("give at most one of --alpha, --beta, --c")
    if args.beta is not None:
        return LogDamped(args.beta), {"form": "LogDamped", "beta": args.beta}
    if args.c is not None:
        return Linear(args.c), {"form": "Linear", "c": args.c}
    alpha = 1.0 if args.alpha is None else args.alpha
    return PowerLaw(alpha), {"form": "PowerLaw", "alpha": alpha}


def _fmt(x: float) -> str:
    return repr(float(x)) if np.isfinite(x) else ""


def _detect_format(path: str, fmt: Optional[str]) -> str:
    if fmt:
        return fmt
    low = path.lower()
    if low.endswith(".trace"):
        return "trace"
    if low.endswith(".csv"):
        return "hist"
    # edge lists: a third column means timestamps
    try:
        with open(path, "rb") as fh:
            for line in fh:
                fields = line.split()
                if fields and not fields[0].startswith(b"#"):
                    return "timed-edges" if len(fields) == 3 else "edges"
    except OSError:
        pass
    return "edges"


def load_input(path: str, fmt: Optional[str] = None):
    """Snapshot or GrowthTrace from a file, format chosen by flag or extension.

    Formats: ``trace`` (N / E src dst tokens), ``hist`` (k,n_k CSV),
    ``edges`` (untimed edge list) and ``timed-edges`` (src dst time).
    """
    fmt = _detect_format(path, fmt)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        if fmt == "trace":
            return read_trace(fh)
        if fmt == "hist":
            return Snapshot.from_histogram(read_histogram(fh))
        if fmt in ("edges", "timed-edges"):
            return ingest_edge_list(fh, timed=fmt == "timed-edges")
    raise UsageError(f"unknown input format {fmt!r}")


def _snapshot(obj) -> Snapshot:
    return obj if isinstance(obj, Snapshot) else obj.snapshot()


# --- simulate ------------------------------------------------------------------

def _write_edges(fh, tr):
    """Timed edge list ``src dst t``; ``t`` is the step at which the edge arrived."""
    steps = np.flatnonzero(tr.kinds == 1)
    for t in steps:
        fh.write(f"{tr.src[t]} {tr.dst[t]} {t + 1}\n")


def cmd_simulate(args) -> int:
    A, a_echo = _attachment(args)
    if args.sequence:
        with open(args.sequence, "rb") as fh:
            seq = read_sequence(fh)
        T = args.T if args.T is not None else len(seq) + 1
        schedule = Sequence(seq)
        s_echo = {"schedule": "sequence", "sequence": os.path.basename(args.sequence)}
    else:
        if args.T is None:
            raise UsageError("--T is required unless --sequence is given")
        T = args.T
        schedule = Constant(args.p)
        s_echo = {"schedule": "constant", "p": args.p}
    if args.replicates < 1:
        raise UsageError("--replicates must be positive")
    if args.output == "-" and args.replicates > 1:
        raise UsageError("-o - writes a single trace; drop --replicates")

    def one(i):
        seed = args.seed if args.replicates == 1 else replicate_seed(args.seed, i)
        res = simulate(SGConfig(T, schedule, seed, record_trace=True), A)
        echo = {"T": T, "seed": seed, "base_seed": args.seed, "replicate": i,
                "N": res.snapshot.N, "E": res.snapshot.E, **a_echo, **s_echo}
        return res, echo

    results = run_parallel(one, args.replicates, args.threads)
    for i, (res, echo) in enumerate(results):
        header = {k: json.dumps(v, sort_keys=True) for k, v in echo.items()}
        if args.output == "-":
            write_trace(res.trace, sys.stdout, header)
            continue
        prefix = args.output if args.replicates == 1 else f"{args.output}_{i:03d}"
        with _open_out(prefix + ".trace") as fh:
            write_trace(res.trace, fh, header)
        with _open_out(prefix + ".hist.csv") as fh:
            write_histogram(res.snapshot.histogram, fh, header)
        if args.edges:
            with _open_out(prefix + ".edges") as fh:
                _echo_lines(fh, echo)
                _write_edges(fh, res.trace)
        log.info("wrote %s (N=%d, E=%d)", prefix, res.snapshot.N, res.snapshot.E)
    return EXIT_OK


# --- estimate ------------------------------------------------------------------

def run_estimate(args) -> AttachmentEstimate:
    data = load_input(args.input, args.input_format)
    method = args.method
    if method == "mle":
        if isinstance(data, Snapshot):
            raise DataError("mle needs timed input (a trace or a timed edge list)")
        est = estimate_mle_full(data, tol=args.tol, max_iter=args.max_iter,
                                collapse_ties=args.collapse_ties)
        d = est.diagnostics
        log.info("mle: %d iterations, converged=%s", d["iterations"], d["converged"])
        if not d["converged"]:
            log.warning("mle did not converge within %d iterations", args.max_iter)
    else:
        snap = _snapshot(data)
        if method == "baseline":
            est = estimate_baseline(snap.histogram)
            est.config = {"N": snap.N, "E": snap.E}
        else:
            cfg = OneshotConfig(args.M, args.S, args.R, args.seed, threads=args.threads)
            log.info("%s: M=%d S=%d R=%d on N=%d, E=%d", method, cfg.M, cfg.S, cfg.R,
                     snap.N, snap.E)
            if method == "oneshot":
                est = estimate_oneshot(snap, cfg)
            else:
                bins = BinningScheme.geometric(snap.histogram.max_degree, args.bin_ratio)
                est = estimate_oneshot_binned(snap, cfg, bins, args.bin_numerator)
                est.config["bin_ratio"] = args.bin_ratio
    if args.normalize and len(est):
        est = est.normalized()
    est.config["input"] = os.path.basename(args.input)
    return est


def cmd_estimate(args) -> int:
    est = run_estimate(args)
    with _open_out(args.output) as fh:
        if args.format == "json":
            est.to_json(fh)
        else:
            est.to_csv(fh)
    log.info("%s estimate: %d records", est.method, len(est))
    return EXIT_OK


# --- fit -------------------------------------------------------------------------

def run_fit(args):
    if args.form == "gamma":
        if args.kmin is None:
            raise UsageError("--form gamma needs --kmin")
        snap = _snapshot(load_input(args.input, args.input_format))
        res = fit_gamma(snap.histogram, args.kmin)
        source = {"k_min": args.kmin}
    else:
        try:
            with open(args.input, "rb") as fh:
                est = AttachmentEstimate.read(fh)
        except OSError as exc:
            raise DataError(f"cannot read {args.input}: {exc.strerror}") from None
        if args.form == "alpha":
            res = fit_alpha(est, weighted=args.weighted)
        else:
            res = fit_beta(est, weighted=args.weighted)
        source = {"method": est.method, "estimate_config": est.config}
    return res, source


def cmd_fit(args) -> int:
    res, source = run_fit(args)
    out = res.to_dict()
    out["report"] = res.report()
    out["config"] = {"form": args.form, "weighted": args.weighted,
                     "input": os.path.basename(args.input), **source}
    with _open_out(args.output) as fh:
        json.dump(out, fh, indent=1, sort_keys=True)
        fh.write("\n")
    log.info("%s", res.report())
    return EXIT_OK


# --- diagnose ----------------------------------------------------------------------

def replicate_counts(T: int, p: float, A, n: int, seed: int, threads=None) -> list:
    """Final dense ``n_k`` of ``n`` independent SG runs."""
    return run_parallel(lambda i: simulate_counts(T, Constant(p), A, seed_sequence(seed, i)),
                        n, threads)


def ratio_check(counts, A, k_max: int = 10) -> dict:
    """Normalized tail ratio against the true ``A_k / A_1`` for ``1 <= k <= k_max``."""
    ratio = tail_ratio(counts)
    ks = np.arange(1, min(k_max, len(ratio) - 1) + 1)
    truth = A.values(k_max + 1)
    norm = ratio[ks] / ratio[1]
    expected = truth[ks] / truth[1]
    return {"k": ks, "ratio": ratio[ks], "normalized": norm, "expected": expected,
            "rel_err": np.abs(norm - expected) / expected}


def pi_check(counts, c: float, p: float, T: int, k_max: int = 5) -> dict:
    """Mean ``n_k(T) / (p T)`` against the asymptotic law for ``A_k = k + c``."""
    width = max(k_max + 1, max(len(x) for x in counts))
    mat = np.zeros((len(counts), width))
    for i, x in enumerate(counts):
        mat[i, :len(x)] = x
    emp = mat.mean(axis=0)[:k_max + 1] / (p * T)
    pi = asymptotic_pi(c, p, k_max).values
    return {"k": np.arange(k_max + 1), "empirical": emp, "pi": pi,
            "rel_err": np.abs(emp - pi) / pi}


def _write_table(fh, echo: dict, table: dict):
    _echo_lines(fh, echo)
    cols = list(table)
    fh.write(",".join(cols) + "\n")
    for i in range(len(table[cols[0]])):
        row = []
        for c in cols:
            v = table[c][i]
            row.append(str(int(v)) if np.issubdtype(type(v), np.integer) else _fmt(v))
        fh.write(",".join(row) + "\n")


def cmd_diagnose(args) -> int:
    if args.tool == "pt":
        with open(args.input, "rb") as fh:
            seq = read_sequence(fh)
        series = estimate_pt_window(seq, args.w)
        table = {"t": np.arange(1, len(series) + 1), "p_hat": series}
        echo = {"tool": "pt", "w": args.w, "input": os.path.basename(args.input)}
    elif args.tool == "ratio":
        A, a_echo = _attachment(args)
        counts = replicate_counts(args.T, args.p, A, args.reps, args.seed, args.threads)
        table = ratio_check(counts, A, args.kmax)
        echo = {"tool": "ratio", "T": args.T, "p": args.p, "reps": args.reps,
                "seed": args.seed, **a_echo,
                "max_rel_err": float(np.max(table["rel_err"]))}
    else:
        A = Linear(args.c)
        counts = replicate_counts(args.T, args.p, A, args.reps, args.seed, args.threads)
        table = pi_check(counts, args.c, args.p, args.T, args.kmax)
        echo = {"tool": "pi", "T": args.T, "p": args.p, "c": args.c, "reps": args.reps,
                "seed": args.seed, "max_rel_err": float(np.max(table["rel_err"]))}
    with _open_out(args.output) as fh:
        _write_table(fh, echo, table)
    if "max_rel_err" in echo:
        log.info("%s: max relative error %.4f", args.tool, echo["max_rel_err"])
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------------

def _add_attachment(p):
    g = p.add_argument_group("attachment function (default PowerLaw alpha=1)")
    g.add_argument("--alpha", type=float, help="A_k = max(k,1)^alpha")
    g.add_argument("--beta", type=float, help="A_k = max(k,1)/(1+beta log max(k,1))")
    g.add_argument("--c", type=float, help="A_k = k + c")


def _add_threads(p):
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $PAONESHOT_THREADS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paoneshot",
                                 description="Preferential attachment from one snapshot.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-q", "--quiet", action="store_true", help="no progress messages")
    # also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="no progress messages")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate SG networks")
    s.add_argument("--T", type=int, help="time-steps (default: sequence length + 1)")
    s.add_argument("--p", type=float, default=0.5, help="node probability per step")
    s.add_argument("--sequence", help="replay N/E tokens from this file")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--edges", action="store_true", help="also write a timed edge list")
    s.add_argument("-o", "--output", default="sim", help="output prefix, or - for stdout")
    _add_attachment(s)
    _add_threads(s)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common], help="estimate the attachment function")
    e.add_argument("input")
    e.add_argument("--input-format", choices=["trace", "hist", "edges", "timed-edges"])
    e.add_argument("--method", default="oneshot",
                   choices=["baseline", "oneshot", "oneshot-binned", "mle"])
    e.add_argument("--M", type=int, default=100)
    e.add_argument("--S", type=int, default=5)
    e.add_argument("--R", type=int, default=5)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--bin-ratio", type=float, default=2.0)
    e.add_argument("--bin-numerator", choices=["observed", "all"], default="observed",
                   help="degrees whose tails enter each bin's numerator")
    e.add_argument("--tol", type=float, default=1e-6)
    e.add_argument("--max-iter", type=int, default=1000)
    e.add_argument("--collapse-ties", action="store_true",
                   help="mle: one step per distinct timestamp")
    e.add_argument("--normalize", action="store_true")
    e.add_argument("--format", choices=["csv", "json"], default="csv")
    e.add_argument("-o", "--output", default="-")
    _add_threads(e)
    e.set_defaults(func=cmd_estimate)

    f = sub.add_parser("fit", parents=[common], help="fit a parametric form")
    f.add_argument("input", help="estimate file (alpha, beta) or network (gamma)")
    f.add_argument("--form", choices=["alpha", "beta", "gamma"], default="alpha")
    f.add_argument("--kmin", type=int)
    f.add_argument("--input-format", choices=["trace", "hist", "edges", "timed-edges"])
    w = f.add_mutually_exclusive_group()
    w.add_argument("--weighted", dest="weighted", action="store_true", default=True)
    w.add_argument("--unweighted", dest="weighted", action="store_false")
    f.add_argument("-o", "--output", default="-")
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", parents=[common], help="model diagnostics")
    d.add_argument("tool", choices=["ratio", "pi", "pt"])
    d.add_argument("input", nargs="?", help="event sequence (pt)")
    d.add_argument("--T", type=int, default=200_000)
    d.add_argument("--p", type=float, default=0.5)
    d.add_argument("--reps", type=int, default=20)
    d.add_argument("--kmax", type=int, default=None)
    d.add_argument("--w", type=int, default=500)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("-o", "--output", default="-")
    _add_attachment(d)
    _add_threads(d)
    d.set_defaults(func=cmd_diagnose)
    return ap


def _check_diagnose(args):
    if args.tool == "pt":
        if not args.input:
            raise UsageError("diagnose pt needs an input sequence")
        if args.w < 1:
            raise UsageError("--w must be at least 1")
        return
    if args.T < 2 or args.reps < 1:
        raise UsageError("--T must be at least 2 and --reps positive")
    if args.kmax is None:
        args.kmax = 10 if args.tool == "ratio" else 5
    if args.tool == "pi":
        if args.alpha is not None or args.beta is not None:
            raise UsageError("diagnose pi uses A_k = k + c; give --c only")
        if args.c is None:
            args.c = 1.0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "diagnose":
            _check_diagnose(args)
        return args.func(args)
    except UsageError as exc:
        print(f"paoneshot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"paoneshot: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"paoneshot: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        print(f"paoneshot: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"paoneshot: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
