"""Seeded random event programs for equivalence sweeps.

Programs mix Boolean connectives over the variables and earlier declarations
with guarded-value sums and comparison atoms, exercising the same node kinds
the clustering encodings use while staying small enough for exhaustive
oracle enumeration.
"""

from __future__ import annotations

import random

from .events import (
    Add, And, Atom, CondVal, Guard, Not, Or, Ref, Var, VarTable, TRUE,
)
from .eventprog import Decl, EventProgram


def random_instance(seed, max_vars=10, min_vars=2):
    """Returns (EventProgram, VarTable, target eids)."""
    rng = random.Random(seed)
    m = rng.randint(min_vars, max_vars)
    vt = VarTable(tuple(("x%d" % i, round(rng.uniform(0.15, 0.85), 3))
                        for i in range(m)))
    names = [n for n, _ in vt.vars]
    n_decl = rng.randint(3, 9)
    decls = []
    bool_pool = []  # eids of Boolean declarations
    num_pool = []   # eids of numeric declarations

    def rand_event(depth):
        r = rng.random()
        if depth <= 0 or r < 0.35:
            if bool_pool and rng.random() < 0.4:
                return Ref(rng.choice(bool_pool))
            return Var(rng.choice(names))
        if r < 0.55:
            return Not(rand_event(depth - 1))
        if r < 0.8:
            kids = tuple(rand_event(depth - 1) for _ in range(rng.randint(2, 3)))
            return And(kids) if rng.random() < 0.5 else Or(kids)
        return Atom(rng.choice(("<=", "<", ">=", ">")),
                    rand_cval(depth - 1), rand_cval(depth - 1))

    def rand_cval(depth):
        r = rng.random()
        if depth <= 0 or r < 0.4:
            if num_pool and rng.random() < 0.35:
                return Ref(rng.choice(num_pool))
            return CondVal(rand_event(0) if rng.random() < 0.8 else TRUE,
                           rng.choice((0.0, 0.5, 1.0, 2.0, 3.0, 5.0)))
        if r < 0.8:
            kids = tuple(rand_cval(depth - 1) for _ in range(rng.randint(2, 3)))
            return Add(kids)
        return Guard(rand_event(depth - 1), rand_cval(depth - 1))

    for d in range(n_decl):
        eid = "E%d" % d
        if rng.random() < 0.7:
            decls.append(Decl(eid, (), rand_event(rng.randint(1, 3))))
            bool_pool.append(eid)
        else:
            decls.append(Decl(eid, (), rand_cval(rng.randint(1, 2))))
            num_pool.append(eid)
    if not bool_pool:
        decls.append(Decl("E%d" % n_decl, (), rand_event(2)))
        bool_pool.append("E%d" % n_decl)
    targets = rng.sample(bool_pool, min(len(bool_pool), rng.randint(1, 3)))
    return EventProgram(tuple(decls)), vt, targets
