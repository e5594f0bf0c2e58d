"""Distributed compilation: the decision tree split into depth-bounded jobs.

A job owns the subtree rooted at a branch prefix.  While exploring, a job
forks a child job whenever a descent would cross a depth that is a multiple
of the job depth ``d``; the child replays the prefix to rebuild its root mask
and commits its probability-bound deltas and unused error budgets when done.
Commits are serialized and idempotent per job id, so re-running a failed job
is safe.

Two schedulers:

  * ``workers == 1`` runs every forked job immediately, in place, on the one
    mask state.  This preserves the sequential budget flow exactly, so the
    run visits precisely the branches sequential compilation visits.
  * ``workers > 1`` uses a FIFO queue and a thread per worker.  Each job gets
    its base budget share at fork time; residuals committed by finished jobs
    go to a shared pool that newly started jobs drain.  This may explore a
    little more than the sequential run but never violates the epsilon
    contract, because budget mass is conserved.
"""

from __future__ import annotations

import math
import queue
import threading

from .compile import CompileResult, ConfigError, Search, TargetBounds, finish_result
from .network import Stats


def max_job_count(m, d):
    """Upper bound on the number of jobs for m variables and job depth d."""
    if m < 1 or d < 1:
        raise ConfigError("variable count and job depth must be >= 1")
    return sum(2 ** (i * d) for i in range(math.ceil(m / d)))


def _job_id(prefix):
    return "".join("1" if v else "0" for _n, v in prefix) or "root"


class _Ledger:
    """Serialized commit point for bounds, budgets and the job log."""

    def __init__(self, nt, epsilon):
        self.lock = threading.Lock()
        self.lower = [0.0] * nt
        self.upper = [1.0] * nt
        self.pool = [0.0] * nt
        self.epsilon = epsilon
        self.committed = set()
        self.log = []
        self.stats = Stats()
        self.jobs_created = 0

    def seed(self, lower, upper):
        self.lower = list(lower)
        self.upper = list(upper)

    def snapshot(self):
        with self.lock:
            return list(self.lower), list(self.upper)

    def drain_pool(self):
        with self.lock:
            out = self.pool
            self.pool = [0.0] * len(out)
            return out

    def commit(self, job_id, prefix, lo_delta, up_delta, residual, stats):
        with self.lock:
            if job_id in self.committed:
                return False
            self.committed.add(job_id)
            for i, (dl, du) in enumerate(zip(lo_delta, up_delta)):
                self.lower[i] += dl
                self.upper[i] += du
                self.pool[i] += residual[i]
            self.log.append({
                "job": job_id,
                "prefix": [[n, bool(v)] for n, v in prefix],
                "lower_delta": list(lo_delta),
                "upper_delta": list(up_delta),
            })
            s = self.stats
            s.branches += stats.branches
            s.leaves += stats.leaves
            s.pruned += stats.pruned
            s.propagations += stats.propagations
            s.replays += stats.replays
            return True


def run_distributed(net, vartable, epsilon, scheme="hybrid", workers=1,
                    job_depth=1, commit_log=None, fault_hook=None,
                    max_retries=2):
    """Compile the network's targets with parallel workers.

    Satisfies the same bounds contract as sequential compilation; with one
    worker the result (and visit order) is identical to the sequential run.
    """
    if scheme not in ("exact", "hybrid"):
        raise ConfigError("distributed execution supports exact or hybrid")
    if workers < 1 or job_depth < 1:
        raise ConfigError("workers and job depth must be >= 1")

    if workers == 1:
        result, log = _run_synchronous(net, vartable, epsilon, scheme, job_depth,
                                       fault_hook)
    else:
        result, log = _run_pool(net, vartable, epsilon, scheme, workers,
                                job_depth, fault_hook, max_retries)
    if commit_log is not None:
        commit_log.extend(log)
    return result


def _run_synchronous(net, vt, epsilon, scheme, d, fault_hook):
    stats = Stats()
    log = []
    search = Search(net, vt, epsilon, scheme, stats=stats, job_depth=d)

    def forker(prefix, pr, E, depth):
        stats.jobs += 1
        job_id = _job_id(prefix)
        if fault_hook is not None:
            fault_hook(job_id)
        before_lo = list(search.state.problower)
        before_up = list(search.state.probupper)
        residual = search._dfs(prefix[-1], prefix, pr, list(E), depth)
        log.append({
            "job": job_id,
            "prefix": [[n, bool(v)] for n, v in prefix],
            "lower_delta": [a - b for a, b in zip(search.state.problower, before_lo)],
            "upper_delta": [a - b for a, b in zip(search.state.probupper, before_up)],
        })
        return residual

    search.forker = forker
    search.preassign_certain()
    search.check_targets_reachable()
    stats.jobs += 1  # the root job
    if not search.all_resolved():
        search.run()
    log.insert(0, {"job": "root", "prefix": [], "lower_delta": [],
                   "upper_delta": []})
    return finish_result(search), log


def _run_pool(net, vt, epsilon, scheme, workers, d, fault_hook, max_retries):
    nt = len(net.targets)
    ledger = _Ledger(nt, epsilon)

    # Count the variable-independent decisions (initial masks plus certain
    # variables) exactly once, on a probe state.
    probe_stats = Stats()
    probe = Search(net, vt, epsilon, scheme, stats=probe_stats)
    probe.preassign_certain()
    probe.check_targets_reachable()
    ledger.seed(probe.state.problower, probe.state.probupper)
    ledger.stats.propagations += probe_stats.propagations

    if probe.all_resolved():
        return _result_from_ledger(net, ledger, scheme, epsilon), ledger.log

    work = queue.Queue()
    outstanding = [1]
    done = threading.Event()
    failures = []
    retries = {}
    lock = threading.Lock()

    root = {"id": "root", "prefix": (), "base": [2.0 * epsilon] * nt, "depth": 0}
    ledger.jobs_created = 1
    ledger.stats.jobs = 1
    work.put(root)

    def finish_one():
        with lock:
            outstanding[0] -= 1
            if outstanding[0] == 0:
                done.set()

    def spawn(prefix, pr, E, depth):
        job = {"id": _job_id(prefix), "prefix": prefix, "base": list(E),
               "depth": depth}
        with lock:
            outstanding[0] += 1
        with ledger.lock:
            ledger.jobs_created += 1
            ledger.stats.jobs += 1
        work.put(job)
        return None  # asynchronous: residual comes back through the pool

    def execute(job):
        if fault_hook is not None:
            fault_hook(job["id"])
        stats = Stats()
        search = Search(net, vt, epsilon, scheme, stats=stats,
                        forker=spawn, job_depth=d)
        state = search.state
        state.suppress_bounds = True
        search.preassign_certain()
        pr = 1.0
        prefix = job["prefix"]
        for name, value in prefix[:-1]:
            pr *= vt.p_true(name) if value else 1.0 - vt.p_true(name)
            search.assigned.add(name)
            state.assign(name, value, pr)
            stats.replays += 1
        state.suppress_bounds = False
        snap_lo, snap_up = ledger.snapshot()
        state.problower[:] = snap_lo
        state.probupper[:] = snap_up
        budgets = job["base"]
        if epsilon > 0.0:
            extra = ledger.drain_pool()
            budgets = [b + e for b, e in zip(budgets, extra)]
        if prefix:
            name, value = prefix[-1]
            pr *= vt.p_true(name) if value else 1.0 - vt.p_true(name)
            search.assigned.add(name)
            residual = search._dfs((name, value), prefix, pr, list(budgets),
                                   job["depth"])
        else:
            residual = search._dfs(None, (), 1.0, list(budgets), 0)
        lo_delta = [a - b for a, b in zip(state.problower, snap_lo)]
        up_delta = [a - b for a, b in zip(state.probupper, snap_up)]
        ledger.commit(job["id"], prefix, lo_delta, up_delta, residual, stats)

    def worker_loop():
        while not done.is_set():
            try:
                job = work.get(timeout=0.05)
            except queue.Empty:
                continue
            try:
                if job["id"] in ledger.committed:
                    finish_one()
                    continue
                execute(job)
                finish_one()
            except Exception as exc:  # re-queue: commits are idempotent
                n = retries.get(job["id"], 0)
                if n < max_retries:
                    retries[job["id"]] = n + 1
                    work.put(job)
                else:
                    failures.append((job["id"], exc))
                    finish_one()

    threads = [threading.Thread(target=worker_loop, daemon=True)
               for _ in range(workers)]
    for t in threads:
        t.start()
    done.wait()
    for t in threads:
        t.join()
    if failures:
        raise failures[0][1]
    return _result_from_ledger(net, ledger, scheme, epsilon), ledger.log


def _result_from_ledger(net, ledger, scheme, epsilon):
    out = []
    for i, (_nid, _t, eid) in enumerate(net.targets):
        lo = min(max(ledger.lower[i], 0.0), 1.0)
        hi = min(max(ledger.upper[i], 0.0), 1.0)
        if lo > hi:
            lo = hi = (lo + hi) * 0.5
        out.append(TargetBounds(eid, lo, hi))
    return CompileResult(out, ledger.stats, scheme, epsilon)
