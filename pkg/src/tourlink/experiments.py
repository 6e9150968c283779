"""Experiment records, single trials, replay and parallel sweeps.

A trial is (command, params, seed).  The tournament is regenerated from the
``source`` entry of params, so a record carries everything needed to rerun
it and to re-check its certificate.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import connectivity as conn
from . import constructions as cons
from . import linkage as lk
from . import subdivision as sd
from .errors import BudgetExceeded, HypothesisExhausted, VerificationError
from .tournament import Tournament, min_out_degree, random_tournament, strong_components

WORKERS_ENV = "TOURLINK_WORKERS"
OUTCOMES = ("success", "hypothesis_exhausted", "counterexample", "error")


@dataclass
class ExperimentRecord:
    command: str
    params: dict
    seed: int
    outcome: str
    certificate: dict | None = None
    wall_time_ms: float = 0.0
    potential_trace: list | None = None
    message: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ExperimentRecord":
        return cls(**json.loads(line))


# -- tournaments from params -------------------------------------------------------

def tournament_from(source: dict, seed: int) -> tuple[Tournament, dict]:
    """Regenerate the tournament named by ``source``; also returns part labels."""
    kind = source.get("kind", "random")
    if kind == "random":
        return random_tournament(int(source["n"]), seed), {}
    if kind == "popielarz":
        c = cons.popielarz(cons.PopielarzSpec(int(source["k"]), int(source["n"]), seed,
                                              bool(source.get("transitive_inside", False))))
        return c.tournament, c.parts
    if kind == "blowup":
        c = cons.triangle_blowup(cons.BlowupSpec(int(source["k"]), int(source["size_a"]),
                                                 int(source["size_b"]), seed,
                                                 bool(source.get("transitive_inside", False))))
        return c.tournament, c.parts
    if kind == "transitive":
        return cons.transitive(int(source["n"])), {}
    raise ValueError(f"cannot regenerate a tournament of kind {kind!r}")


def fingerprint(t: Tournament) -> str:
    return hashlib.sha256(np.packbits(t.adj).tobytes()).hexdigest()[:16]


def pick_terminals(n: int, count: int, seed: int, exclude=()) -> list[int]:
    """Distinct vertices drawn from a stream separate from the tournament's."""
    rng = np.random.default_rng([seed, 0x7E41])
    pool = np.setdiff1d(np.arange(n), np.asarray(list(exclude), dtype=int))
    if pool.size < count:
        raise ValueError(f"need {count} terminals but only {pool.size} vertices are available")
    return [int(v) for v in rng.choice(pool, size=count, replace=False)]


# -- trials --------------------------------------------------------------------------

Trial = Callable[[Tournament, dict, int, list], dict]
TRIALS: dict[str, Trial] = {}


def trial(name: str):
    def deco(fn: Trial) -> Trial:
        TRIALS[name] = fn
        return fn
    return deco


def _ints(v) -> list[int]:
    if v is None:
        return []
    if isinstance(v, str):
        return [int(x) for x in v.split(",") if x.strip()]
    return [int(x) for x in v]


@trial("degrees")
def _degrees(t, params, seed, trace):
    return {"min_out": min_out_degree(t), "min_in": int(t.in_degrees.min()),
            "max_out": int(t.out_degrees.max())}


@trial("scc")
def _scc(t, params, seed, trace):
    return {"components": [list(map(int, c)) for c in strong_components(t).components]}


@trial("connectivity")
def _connectivity(t, params, seed, trace):
    cap = params.get("at_least")
    kappa = conn.vertex_connectivity(t, at_most=cap)
    out = {"kappa": kappa, "capped": cap is not None and kappa >= cap}
    if cap is not None and kappa < cap:
        raise _Counterexample(out, f"connectivity {kappa} < {cap}")
    return out


@trial("disjoint-paths")
def _disjoint(t, params, seed, trace):
    ps = conn.max_disjoint_paths(t, _ints(params["sources"]), _ints(params["sinks"]),
                                 avoid=_ints(params.get("avoid")), limit=params.get("limit"))
    conn.verify_path_system(t, ps)
    return {"count": len(ps), "paths": [list(p) for p in ps.paths]}


@trial("linked-exact")
def _linked(t, params, seed, trace):
    budget = int(params.get("budget") or conn.DEFAULT_BUDGET)
    if params.get("sources"):
        inst = conn.LinkageInstance(_ints(params["sources"]), _ints(params["sinks"]))
        res = conn.is_k_linked_exact(t, inst, budget)
        out = {"linked": res.linked, "paths": [list(p) for p in res.paths or []]}
        if res.paths:
            conn.verify_paths(t, res.paths, list(zip(inst.sources, inst.sinks)))
        if not res.linked:
            raise _Counterexample(out, "instance is not linkable")
        return out
    k = int(params["k"])
    bad = conn.find_unlinked_instance(t, k, budget)
    if bad is not None:
        raise _Counterexample({"linked": False, "sources": list(bad.sources), "sinks": list(bad.sinks)},
                              "found an unlinkable instance")
    return {"linked": True}


@trial("extract-core")
def _core(t, params, seed, trace):
    k = int(params["k"])
    core = sd.extract_min_outdeg_subtournament(t, None, k)
    check_core(t, core, k)
    return {"core": [int(v) for v in core], "size": len(core)}


def check_core(t: Tournament, core, k: int) -> None:
    """delta+ >= k inside the core, size <= 3k^2, and every vertex is needed."""
    sub = t.adj[np.ix_(core, core)]
    outs = sub.sum(axis=1)
    if outs.min() < k:
        raise VerificationError("core-degree", f"min out-degree {outs.min()} < {k}")
    if len(core) > 3 * k * k:
        raise VerificationError("core-size", f"{len(core)} > 3k^2 = {3 * k * k}")
    for i in range(len(core)):
        # dropping vertex i removes one out-edge from each of its in-neighbours
        rest = np.delete(outs - sub[:, i], i)
        if rest.min() >= k:
            raise VerificationError("core-minimal", f"vertex {core[i]} can be removed")


@trial("subdivide")
def _subdivide(t, params, seed, trace):
    ps = sd.embed_subdivision(t, int(params["k"]), budget=int(params.get("budget") or sd.DEFAULT_ROUTE_BUDGET))
    return ps.to_dict()


@trial("kstar")
def _kstar(t, params, seed, trace):
    ks = sd.embed_kstar(t, int(params["k"]), budget=int(params.get("budget") or sd.DEFAULT_ROUTE_BUDGET))
    return ks.to_dict()


def _reversing_sets(t: Tournament, params: dict, seed: int):
    k = int(params["k"])
    if params.get("A"):
        return _ints(params["A"]), _ints(params["B"]), _ints(params["L"]), k
    size = int(params.get("l_size") or 4 * k)
    vs = pick_terminals(t.n, 2 * k + size, seed)
    return vs[:k], vs[k:2 * k], vs[2 * k:], k


@trial("reverse-paths")
def _reverse_paths(t, params, seed, trace):
    A, B, L, k = _reversing_sets(t, params, seed)
    a_sys, b_sys, st = lk.find_reversing_system(t, A, B, L, k, trace=trace.append,
                                                eager_matching=not params.get("lazy"))
    return {"A": A, "B": B, "L": L, "to_L": [list(p) for p in a_sys.paths],
            "from_L": [list(p) for p in b_sys.paths], "flipped": st.flipped}


def link_instance(t: Tournament, params: dict, seed: int) -> conn.LinkageInstance:
    if params.get("sources"):
        return conn.LinkageInstance(_ints(params["sources"]), _ints(params["sinks"]))
    k = int(params["k"])
    vs = pick_terminals(t.n, 2 * k, seed)
    return conn.LinkageInstance(vs[:k], vs[k:])


@trial("link")
def _link(t, params, seed, trace):
    inst = link_instance(t, params, seed)
    res = lk.link_terminals(t, inst, r_override=params.get("r"), trace=trace.append,
                            embed_budget=int(params.get("budget") or sd.DEFAULT_ROUTE_BUDGET))
    return {"sources": list(inst.sources), "sinks": list(inst.sinks),
            "paths": [list(map(int, p)) for p in res.paths], "reflected": res.reflected}


class _Counterexample(Exception):
    def __init__(self, certificate: dict, message: str):
        self.certificate = certificate
        super().__init__(message)


def run_trial(command: str, params: dict, seed: int, t: Tournament | None = None) -> ExperimentRecord:
    """Run one trial and wrap the outcome; never raises for algorithmic failures."""
    if command not in TRIALS:
        raise ValueError(f"unknown trial command {command!r}")
    trace: list = []
    start = time.perf_counter()
    cert = None
    msg = ""
    try:
        if t is None:
            t, _ = tournament_from(params.get("source", {"kind": "random", "n": params.get("n")}), seed)
        cert = TRIALS[command](t, params, seed, trace)
        outcome = "success"
    except HypothesisExhausted as e:
        outcome, msg = "hypothesis_exhausted", str(e)
        cert = {"stage": e.stage}
    except _Counterexample as e:
        outcome, msg, cert = "counterexample", str(e), e.certificate
    except (BudgetExceeded, AssertionError, ValueError) as e:
        outcome, msg = "error", f"{type(e).__name__}: {e}"
    ms = (time.perf_counter() - start) * 1000.0
    return ExperimentRecord(command, params, int(seed), outcome, cert, round(ms, 3),
                            trace or None, msg)


# -- replay ----------------------------------------------------------------------------

def verify_certificate(rec: ExperimentRecord, t: Tournament | None = None) -> None:
    """Check a success certificate against the regenerated tournament."""
    if rec.outcome != "success" or rec.certificate is None:
        return
    if t is None:
        t, _ = tournament_from(rec.params.get("source", {"kind": "random", "n": rec.params.get("n")}), rec.seed)
    c, p = rec.certificate, rec.params
    if rec.command == "link":
        inst = conn.LinkageInstance(c["sources"], c["sinks"])
        lk.verify_linkage(t, inst, c["paths"])
    elif rec.command == "reverse-paths":
        lk.verify_reversing_system(t, c["A"], c["B"], c["L"], c["to_L"], c["from_L"])
    elif rec.command == "subdivide":
        sd.verify_subdivision(t, sd.PartialSubdivision.from_dict(c))
    elif rec.command == "kstar":
        sd.verify_kstar(t, sd.KStar.from_dict(c))
    elif rec.command == "extract-core":
        check_core(t, c["core"], int(p["k"]))
    elif rec.command == "disjoint-paths":
        conn.verify_paths(t, c["paths"])


def replay(rec: ExperimentRecord) -> bool:
    """Rerun the trial; True iff the certificate is byte-identical and re-verifies."""
    again = run_trial(rec.command, rec.params, rec.seed)
    same = json.dumps(again.certificate, sort_keys=True) == json.dumps(rec.certificate, sort_keys=True)
    verify_certificate(rec)
    return same and again.outcome == rec.outcome


# -- sweeps ----------------------------------------------------------------------------

@dataclass
class SweepConfig:
    command: str
    params: list[dict]
    seeds: list[int]
    workers: int | None = None

    def jobs(self) -> list[tuple[str, dict, int]]:
        return [(self.command, p, s) for p in self.params for s in self.seeds]


def _job(args) -> str:
    return run_trial(*args).to_json()


def worker_count(requested: int | None = None) -> int:
    if requested:
        return max(1, requested)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def sweep(cfg: SweepConfig, sink: Callable[[ExperimentRecord], None] | None = None) -> list[dict]:
    """Run every (params, seed) pair and summarise per params entry."""
    jobs = cfg.jobs()
    records: list[ExperimentRecord] = []
    workers = worker_count(cfg.workers)
    if workers == 1 or len(jobs) <= 1:
        lines = map(_job, jobs)
        for line in lines:
            rec = ExperimentRecord.from_json(line)
            records.append(rec)
            if sink:
                sink(rec)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for line in pool.map(_job, jobs, chunksize=1):
                # results arrive in submission order, so writing stays serialized here
                rec = ExperimentRecord.from_json(line)
                records.append(rec)
                if sink:
                    sink(rec)
    return summarize(records)


def summarize(records: list[ExperimentRecord]) -> list[dict]:
    groups: dict[str, list[ExperimentRecord]] = {}
    for r in records:
        groups.setdefault(json.dumps(r.params, sort_keys=True), []).append(r)
    rows = []
    for key, recs in groups.items():
        times = np.array([r.wall_time_ms for r in recs])
        row = {"command": recs[0].command, "params": key, "trials": len(recs)}
        for o in OUTCOMES:
            row[o] = sum(r.outcome == o for r in recs)
        row["success_rate"] = row["success"] / len(recs)
        for q in (50, 90, 99):
            row[f"p{q}_ms"] = float(np.percentile(times, q))
        rows.append(row)
    return rows


def write_summary(rows: list[dict], prefix: str) -> None:
    fields = ["command", "params", "trials", *OUTCOMES, "success_rate", "p50_ms", "p90_ms", "p99_ms"]
    with open(prefix + ".csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    with open(prefix + ".json", "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
