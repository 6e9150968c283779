"""Command-line entry point.

Every subcommand writes ExperimentRecords as JSON lines (to --out when given,
otherwise stdout).  Tournaments flow between commands as TRN1 text: ``gen``
and ``construct`` print one, and commands that take a tournament read one
from stdin when --n is not given.

Exit codes: 0 success, 2 hypothesis exhausted, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence, TextIO

from . import constructions as cons
from . import experiments as ex
from .subdivision import bound_d, bound_dstar, log2_bound_d, log2_bound_dstar
from .tournament import Tournament, dumps_trn, loads_trn

EXIT_OK, EXIT_ERROR, EXIT_EXHAUSTED = 0, 1, 2

EXACT_BITS = 12000

TOURNAMENT_COMMANDS = ("degrees", "scc", "connectivity", "disjoint-paths", "linked-exact",
                       "extract-core", "subdivide", "kstar", "reverse-paths", "link")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="size of a seeded random tournament (else TRN1 on stdin)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=int, help="branch-set size override for link")
    p.add_argument("--budget", type=int)
    p.add_argument("--at-least", type=int, dest="at_least")
    p.add_argument("--out", help="append JSON-line records here")
    p.add_argument("--trace", help="write the rewrite trace here as JSON lines")
    p.add_argument("--emit-trn", dest="emit_trn", help="also save the tournament as TRN1")
    p.add_argument("--format", choices=("trn", "json"), default="trn")
    p.add_argument("--sources")
    p.add_argument("--sinks")
    p.add_argument("--avoid")
    p.add_argument("--limit", type=int)
    p.add_argument("--lazy", action="store_true", help="reverse-paths: grow the W-sets on demand")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tourlink", description="Linkage experiments on tournaments.")
    sub = ap.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen", help="print a seeded random tournament")
    _common(g)
    for name in TOURNAMENT_COMMANDS:
        _common(sub.add_parser(name))
    c = sub.add_parser("construct", help="print an extremal construction")
    c.add_argument("kind", choices=("popielarz", "blowup", "transitive", "cycle"))
    c.add_argument("--size-a", type=int, dest="size_a")
    c.add_argument("--size-b", type=int, dest="size_b")
    c.add_argument("--parts", help="cycle: comma-separated part sizes")
    c.add_argument("--transitive-inside", action="store_true", dest="transitive_inside")
    c.add_argument("--parts-out", dest="parts_out", help="sidecar JSON with part labels")
    _common(c)
    v = sub.add_parser("verify", help="check a property or replay records")
    v.add_argument("what", choices=("connectivity", "records"))
    v.add_argument("--records", help="JSON-lines file to replay")
    _common(v)
    b = sub.add_parser("bounds", help="print the degree recursion values")
    _common(b)
    s = sub.add_parser("sweep", help="run a command over many seeds in parallel")
    s.add_argument("trial", choices=sorted(ex.TRIALS))
    s.add_argument("--ns", help="comma-separated sizes")
    s.add_argument("--ks", help="comma-separated k values")
    s.add_argument("--seeds", help="seed range a:b or comma list")
    s.add_argument("--seeds-file", dest="seeds_file")
    s.add_argument("--workers", type=int)
    s.add_argument("--summary", help="prefix for the CSV and JSON summaries")
    _common(s)
    return ap


class _Output:
    def __init__(self, path: str | None, fallback: TextIO):
        self.fh = open(path, "a") if path else fallback
        self.own = path is not None

    def write(self, rec: ex.ExperimentRecord) -> None:
        self.fh.write(rec.to_json() + "\n")
        self.fh.flush()

    def close(self) -> None:
        if self.own:
            self.fh.close()


def _exit_for(outcome: str) -> int:
    return {"success": EXIT_OK, "hypothesis_exhausted": EXIT_EXHAUSTED}.get(outcome, EXIT_ERROR)


def _params(args, command: str) -> dict:
    keys = ("k", "m", "r", "budget", "at_least", "sources", "sinks", "avoid", "limit")
    p = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if getattr(args, "lazy", False):
        p["lazy"] = True
    return p


def _read_tournament(args, stdin: TextIO) -> tuple[Tournament, dict]:
    if args.n is not None:
        src = {"kind": "random", "n": args.n}
        t, _ = ex.tournament_from(src, args.seed)
        return t, src
    text = stdin.read()
    if not text.strip():
        raise ValueError("no --n given and no TRN1 tournament on stdin")
    t = loads_trn(text)
    return t, {"kind": "stdin", "n": t.n, "fingerprint": ex.fingerprint(t)}


def _construct(args) -> cons.Construction:
    seed = args.seed
    if args.kind == "popielarz":
        return cons.popielarz(cons.PopielarzSpec(args.k, args.n, seed, args.transitive_inside))
    if args.kind == "blowup":
        size_a = args.size_a or 2 * args.k
        size_b = args.size_b or 2 * args.k
        return cons.triangle_blowup(cons.BlowupSpec(args.k, size_a, size_b, seed, args.transitive_inside))
    if args.kind == "transitive":
        return cons.Construction(cons.transitive(args.n), {}, {"construction": "transitive", "n": args.n})
    parts = [int(x) for x in (args.parts or "").split(",") if x]
    return cons.directed_cycle_blowup(parts, seed, args.transitive_inside)


def _seeds(args) -> list[int]:
    if args.seeds_file:
        with open(args.seeds_file) as fh:
            return [int(tok) for tok in fh.read().split()]
    if args.seeds is not None:
        if ":" in args.seeds:
            a, b = args.seeds.split(":")
            return list(range(int(a), int(b)))
        return [int(x) for x in args.seeds.split(",") if x]
    return [args.seed]


def run_subcommand(argv: Sequence[str], stdin: TextIO | None = None, stdout: TextIO | None = None,
                   stderr: TextIO | None = None) -> int:
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    ap = build_parser()
    try:
        args = ap.parse_args(list(argv))
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_OK
    try:
        return _dispatch(args, stdin, stdout, stderr)
    except (ValueError, OSError) as e:
        stderr.write(f"tourlink {args.command}: {e}\n")
        return EXIT_ERROR


def _dispatch(args, stdin, stdout, stderr) -> int:
    cmd = args.command
    if cmd in ("gen", "construct"):
        if cmd == "gen":
            if args.n is None:
                raise ValueError("gen needs --n")
            t, _ = ex.tournament_from({"kind": "random", "n": args.n}, args.seed)
            params = {"source": {"kind": "random", "n": args.n}}
            cert = {"n": t.n, "fingerprint": ex.fingerprint(t)}
        else:
            con = _construct(args)
            t = con.tournament
            params = {"source": dict(con.params, kind=args.kind)}
            cert = {"n": t.n, "fingerprint": ex.fingerprint(t), "parts": {k: list(v) for k, v in con.parts.items()}}
            if args.parts_out:
                with open(args.parts_out, "w") as fh:
                    fh.write(con.parts_json())
        rec = ex.ExperimentRecord(cmd, params, args.seed, "success", cert)
        if args.emit_trn:
            with open(args.emit_trn, "w") as fh:
                fh.write(dumps_trn(t))
        if args.format == "trn":
            stdout.write(dumps_trn(t))
            out = _Output(args.out, stderr) if args.out else None
        else:
            out = _Output(args.out, stdout)
        if out:
            out.write(rec)
            out.close()
        return EXIT_OK

    if cmd == "bounds":
        if args.k is None:
            raise ValueError("bounds needs --k")
        ms = [args.m] if args.m is not None else list(range(args.k * (args.k - 1) + 1))
        rows = []
        for m in ms:
            row = {"k": args.k, "m": m, "log2_d": log2_bound_d(args.k, m), "log2_dstar": log2_bound_dstar(args.k, m)}
            # exact values only while they print as ordinary decimal strings
            if row["log2_d"] < EXACT_BITS:
                row["d"] = str(bound_d(args.k, m))
            if row["log2_dstar"] < EXACT_BITS:
                row["dstar"] = str(bound_dstar(args.k, m))
            rows.append(row)
        out = _Output(args.out, stdout)
        out.write(ex.ExperimentRecord("bounds", {"k": args.k}, args.seed, "success", {"values": rows}))
        out.close()
        return EXIT_OK

    if cmd == "verify":
        return _verify(args, stdin, stdout)

    if cmd == "sweep":
        return _sweep(args, stdout)

    t, src = _read_tournament(args, stdin)
    if args.emit_trn:
        with open(args.emit_trn, "w") as fh:
            fh.write(dumps_trn(t))
    params = _params(args, cmd)
    params["source"] = src
    rec = ex.run_trial(cmd, params, args.seed, t)
    if rec.outcome == "success":
        ex.verify_certificate(rec, t)
    if args.trace:
        with open(args.trace, "w") as fh:
            for line in rec.potential_trace or []:
                fh.write(json.dumps(line, sort_keys=True) + "\n")
    out = _Output(args.out, stdout)
    out.write(rec)
    out.close()
    if rec.message and rec.outcome != "success":
        stderr.write(rec.message + "\n")
    return _exit_for(rec.outcome)


def _verify(args, stdin, stdout) -> int:
    out = _Output(args.out, stdout)
    try:
        if args.what == "connectivity":
            if args.at_least is None:
                raise ValueError("verify connectivity needs --at-least")
            t, src = _read_tournament(args, stdin)
            rec = ex.run_trial("connectivity", {"at_least": args.at_least, "source": src}, args.seed, t)
            rec.command = "verify"
            out.write(rec)
            return _exit_for(rec.outcome)
        if not args.records:
            raise ValueError("verify records needs --records")
        ok = True
        with open(args.records) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = ex.ExperimentRecord.from_json(line)
                if rec.params.get("source", {}).get("kind") == "stdin" or rec.command not in ex.TRIALS:
                    continue
                good = ex.replay(rec)
                ok &= good
                out.write(ex.ExperimentRecord("verify", {"replayed": rec.command}, rec.seed,
                                              "success" if good else "counterexample"))
        return EXIT_OK if ok else EXIT_ERROR
    finally:
        out.close()


def _sweep(args, stdout) -> int:
    ns = [int(x) for x in args.ns.split(",")] if args.ns else ([args.n] if args.n else [])
    ks = [int(x) for x in args.ks.split(",")] if args.ks else [args.k]
    if not ns:
        raise ValueError("sweep needs --n or --ns")
    base = _params(args, args.trial)
    params = []
    for n in ns:
        for k in ks:
            p = dict(base, source={"kind": "random", "n": n})
            if k is not None:
                p["k"] = k
            params.append(p)
    seeds = _seeds(args)
    out = _Output(args.out, stdout)
    try:
        rows = ex.sweep(ex.SweepConfig(args.trial, params, seeds, args.workers), out.write)
    finally:
        out.close()
    if args.summary:
        ex.write_summary(rows, args.summary)
    failed = any(r["error"] for r in rows)
    return EXIT_ERROR if failed else EXIT_OK


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run_subcommand(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
