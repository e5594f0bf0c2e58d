"""Ground truth by exhaustive enumeration of possible worlds.

Evaluates grounded programs in every total valuation and aggregates exact
probabilities; also runs user programs operationally in a single world.  This
is both the correctness oracle for the compiler and the naive baseline that
pays one full program evaluation per world (2^m evaluations for m variables).

Enumeration walks worlds in Gray-code order so consecutive worlds differ in a
single variable and only the declarations downstream of that variable are
re-evaluated; the aggregated numbers are identical to a plain in-order sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import events as ev
from .events import (
    U, VU, Add, And, Atom, CondVal, Const, Dist, Guard, Inv, Mul, Not, Or,
    Pow, Ref, Var, ext_add, ext_compare, ext_dist, ext_inv, ext_mul, ext_pow,
    undef_like,
)
from . import userlang as ul


class OracleError(Exception):
    pass


DEFAULT_WORLD_CAP = 24


# ---------------------------------------------------------------------------
# Grounded-program evaluation
# ---------------------------------------------------------------------------


class _Program:
    """Grounded declarations prepared for fast repeated evaluation."""

    def __init__(self, grounded):
        self.eids = list(grounded.decls.keys())
        self.exprs = [grounded.decls[e] for e in self.eids]
        self.pos = {e: i for i, e in enumerate(self.eids)}
        self.var_deps = self._dependencies()

    def _dependencies(self):
        dep_sets = []
        for expr in self.exprs:
            deps = set()
            self._collect(expr, deps, dep_sets)
            dep_sets.append(deps)
        by_var = {}
        for i, deps in enumerate(dep_sets):
            for v in deps:
                by_var.setdefault(v, []).append(i)
        return by_var

    def _collect(self, e, out, dep_sets):
        if isinstance(e, Var):
            out.add(e.name)
            return
        if isinstance(e, Ref):
            out.update(dep_sets[self.pos[e.name]])
            return
        for c in ev.children_of(e):
            self._collect(c, out, dep_sets)

    def eval_all(self, valuation):
        values = [None] * len(self.exprs)
        for i, expr in enumerate(self.exprs):
            values[i] = self._eval(expr, valuation, values)
        return values

    def reeval(self, valuation, values, var):
        for i in self.var_deps.get(var, ()):
            values[i] = self._eval(self.exprs[i], valuation, values)

    def _eval(self, e, nu, values):
        kind = type(e)
        if kind is Var:
            return nu[e.name]
        if kind is Ref:
            return values[self.pos[e.name]]
        if kind is Const:
            return e.value
        if kind is Not:
            return not self._eval(e.child, nu, values)
        if kind is And:
            for c in e.children:
                if not self._eval(c, nu, values):
                    return False
            return True
        if kind is Or:
            for c in e.children:
                if self._eval(c, nu, values):
                    return True
            return False
        if kind is Atom:
            return ext_compare(e.op, self._eval(e.left, nu, values),
                               self._eval(e.right, nu, values))
        if kind is CondVal:
            if self._eval(e.guard, nu, values):
                return e.value
            return undef_like(e.value)
        if kind is Guard:
            body = self._eval(e.body, nu, values)
            return body if self._eval(e.guard, nu, values) else undef_like(body)
        if kind is Add:
            acc = U
            for c in e.children:
                acc = ext_add(acc, self._eval(c, nu, values))
            return acc
        if kind is Mul:
            if not e.children:
                return U
            acc = self._eval(e.children[0], nu, values)
            for c in e.children[1:]:
                acc = ext_mul(acc, self._eval(c, nu, values))
            return acc
        if kind is Inv:
            return ext_inv(self._eval(e.child, nu, values))
        if kind is Pow:
            return ext_pow(self._eval(e.child, nu, values), e.exponent)
        if kind is Dist:
            return ext_dist(self._eval(e.left, nu, values),
                            self._eval(e.right, nu, values))
        raise TypeError("not an expression: %r" % (e,))


@dataclass
class OracleResult:
    probabilities: dict
    evaluations: int
    total_mass: float


def enumerate_worlds(vartable, cap=DEFAULT_WORLD_CAP):
    """Yield (valuation, probability, flipped_var) in Gray-code order.

    The first world assigns every variable False; ``flipped_var`` is None for
    it and names the single variable toggled since the previous world after.
    """
    m = len(vartable)
    if m > cap:
        raise OracleError(
            "refusing to enumerate 2^%d worlds (cap is 2^%d); raise the cap "
            "explicitly if this is intended" % (m, cap))
    names = vartable.names()
    nu = {n: False for n in names}
    pr = 1.0
    zeros = 0
    for _n, p in vartable.vars:
        f = 1.0 - p
        if f == 0.0:
            zeros += 1
        else:
            pr *= f
    yield dict(nu), (0.0 if zeros else pr), None
    for g in range(1, 1 << m):
        bit = (g & -g).bit_length() - 1
        name = names[bit]
        p_true = vartable.p_true(name)
        old = p_true if nu[name] else 1.0 - p_true
        nu[name] = not nu[name]
        new = p_true if nu[name] else 1.0 - p_true
        if old == 0.0:
            zeros -= 1
        else:
            pr /= old
        if new == 0.0:
            zeros += 1
        else:
            pr *= new
        yield dict(nu), (0.0 if zeros else pr), name


def oracle_probabilities(grounded, vartable, targets=None, cap=DEFAULT_WORLD_CAP):
    """Exact target probabilities by summing the mass of satisfying worlds."""
    prog = _Program(grounded)
    targets = list(targets if targets is not None else grounded.targets)
    tpos = [prog.pos[t] for t in targets]
    sums = [0.0] * len(targets)
    total = 0.0
    values = None
    m = len(vartable)
    if m > cap:
        raise OracleError(
            "refusing to enumerate 2^%d worlds (cap is 2^%d); raise the cap "
            "explicitly if this is intended" % (m, cap))
    names = vartable.names()
    nu = {n: False for n in names}
    pr = 1.0
    zeros = 0
    for _n, p in vartable.vars:
        f = 1.0 - p
        if f == 0.0:
            zeros += 1
        else:
            pr *= f
    values = prog.eval_all(nu)
    w = 0.0 if zeros else pr
    total += w
    for j, tp in enumerate(tpos):
        if values[tp] is True:
            sums[j] += w
    for g in range(1, 1 << m):
        bit = (g & -g).bit_length() - 1
        name = names[bit]
        p_true = vartable.p_true(name)
        old = p_true if nu[name] else 1.0 - p_true
        nu[name] = not nu[name]
        new = p_true if nu[name] else 1.0 - p_true
        if old == 0.0:
            zeros -= 1
        else:
            pr /= old
        if new == 0.0:
            zeros += 1
        else:
            pr *= new
        prog.reeval(nu, values, name)
        w = 0.0 if zeros else pr
        total += w
        for j, tp in enumerate(tpos):
            if values[tp] is True:
                sums[j] += w
    return OracleResult(dict(zip(targets, sums)), 1 << m, total)


# ---------------------------------------------------------------------------
# Per-world reports
# ---------------------------------------------------------------------------


@dataclass
class WorldReport:
    valuation: dict
    probability: float
    values: dict
    objects: list = field(default_factory=list)
    clusters: list = field(default_factory=list)
    medoids: list = field(default_factory=list)

    def cluster_sets(self):
        return [frozenset(c) for c in self.clusters]


def per_world_report(grounded, vartable, valuation, cluster_spec=None):
    """Evaluate every declaration in one world; derive clusters when asked.

    ``cluster_spec`` maps the clustering structure onto grounded identifiers:
    ``{"objects": {label: eid}, "membership": {(i, l): eid},
    "centres": {(i, l): eid}, "k": int}``.
    """
    prog = _Program(grounded)
    values_list = prog.eval_all(valuation)
    values = dict(zip(prog.eids, values_list))
    report = WorldReport(dict(valuation),
                         ev.world_probability(valuation, vartable), values)
    if cluster_spec:
        objects = sorted(l for l, eid in cluster_spec["objects"].items()
                         if values[eid] is True)
        report.objects = objects
        k = cluster_spec["k"]
        existing = set(objects)
        for i in range(k):
            members = sorted(l for (ci, l), eid in cluster_spec["membership"].items()
                             if ci == i and l in existing and values[eid] is True)
            report.clusters.append(members)
            centre = [l for (ci, l), eid in cluster_spec["centres"].items()
                      if ci == i and l in existing and values[eid] is True]
            report.medoids.append(min(centre) if centre else None)
    return report


def world_reports(grounded, vartable, cluster_spec=None, cap=DEFAULT_WORLD_CAP):
    """All per-world reports, in plain binary enumeration order."""
    m = len(vartable)
    if m > cap:
        raise OracleError("refusing to enumerate 2^%d worlds (cap is 2^%d)" % (m, cap))
    names = vartable.names()
    for w in range(1 << m):
        nu = {names[j]: bool((w >> j) & 1) for j in range(m)}
        yield per_world_report(grounded, vartable, nu, cluster_spec)


# ---------------------------------------------------------------------------
# Operational interpretation of user programs in one world
# ---------------------------------------------------------------------------


class InterpError(Exception):
    pass


class _Interp:
    """Direct evaluation of a user program in a fixed world.

    Data points that do not exist in the world enter as the undefined vector;
    all arithmetic, comparisons and reductions follow the same extended
    algebra as event evaluation, so the translated event program and this
    interpreter must agree in every world (which the tests check).
    """

    def __init__(self, dataset, valuation):
        self.ds = dataset
        self.nu = valuation
        self.env = {}

    def run(self, program):
        self.exec_items(program.items)
        return self.env

    def exec_items(self, items):
        for item in items:
            if isinstance(item, ul.UFor):
                lo = self.int_value(item.lo)
                hi = self.int_value(item.hi)
                for v in range(lo, hi):
                    self.env[item.var] = v
                    self.exec_items(item.body)
            elif isinstance(item, ul.UExtCall):
                self.bind_ext(item)
            else:
                self.assign(item)

    def bind_ext(self, item):
        ds = self.ds
        if item.func == "loadData":
            objects = []
            for point in ds.points:
                if ev.eval_event(point.event, self.nu):
                    objects.append(tuple(point.coords))
                else:
                    objects.append(VU)
            vals = [objects, len(objects)]
            if len(item.targets) == 3:
                vals = [objects, len(objects), [list(row) for row in ds.matrix]]
        elif item.func == "loadParams":
            vals = [ds.params.k, ds.params.iterations]
            if len(item.targets) == 2 and getattr(ds.params, "power", None) is not None:
                vals = [ds.params.power, ds.params.iterations]
        else:  # init
            vals = [[self.initial_medoid(i) for i in range(ds.params.k)]]
        if len(vals) != len(item.targets):
            raise InterpError("%s binds %d names, got %d" %
                              (item.func, len(vals), len(item.targets)))
        for name, v in zip(item.targets, vals):
            self.env[name] = v

    def initial_medoid(self, i):
        for l in self.ds.medoid_preference(i):
            point = self.ds.points[l]
            if ev.eval_event(point.event, self.nu):
                return tuple(point.coords)
        return VU

    def int_value(self, e):
        v = self.eval(e)
        if not isinstance(v, int) or isinstance(v, bool):
            raise InterpError("expected a constant integer bound")
        return v

    def assign(self, item):
        value = self.eval(item.expr)
        target = item.target
        if isinstance(target, ul.UName):
            self.env[target.name] = value
            return
        chain = []
        base = target
        while isinstance(base, ul.UIndex):
            chain.append(base.index)
            base = base.base
        if not isinstance(base, ul.UName) or base.name not in self.env:
            raise InterpError("assignment to uninitialised array")
        slot = self.env[base.name]
        for idx in reversed(chain[1:]):
            slot = slot[self.int_value(idx)]
        slot[self.int_value(chain[0])] = value

    def eval(self, e):
        k = type(e)
        if k is ul.ULit:
            return e.value
        if k is ul.UName:
            if e.name not in self.env:
                raise InterpError("undefined identifier %r" % e.name)
            return self.env[e.name]
        if k is ul.UIndex:
            base = self.eval(e.base)
            return base[self.int_value(e.index)]
        if k is ul.UCompare:
            op = "=" if e.op == "==" else e.op
            return ext_compare(op, self.eval(e.left), self.eval(e.right))
        if k is ul.UBinOp:
            l, r = self.eval(e.left), self.eval(e.right)
            return ext_add(l, r) if e.op == "+" else ext_mul(l, r)
        if k is ul.UArrayInit:
            return [None] * self.int_value(e.size)
        if k is ul.UCall:
            return self.call(e)
        if k is ul.UReduce:
            return self.reduce(e)
        raise TypeError("not a user expression: %r" % (e,))

    def call(self, e):
        if e.func == "pow":
            return ext_pow(self.eval(e.args[0]), self.int_value(e.args[1]))
        if e.func == "invert":
            return ext_inv(self.eval(e.args[0]))
        if e.func == "dist":
            return ext_dist(self.eval(e.args[0]), self.eval(e.args[1]))
        if e.func == "scalar_mult":
            return ext_mul(self.eval(e.args[0]), self.eval(e.args[1]))
        if e.func == "breakTies":
            arr = self.eval(e.args[0])
            seen = False
            out = []
            for v in arr:
                keep = bool(v) and not seen
                seen = seen or bool(v)
                out.append(keep)
            return out
        if e.func in ("breakTies1", "breakTies2"):
            arr = self.eval(e.args[0])
            rows, cols = len(arr), len(arr[0]) if arr else 0
            out = [[bool(arr[i][l]) for l in range(cols)] for i in range(rows)]
            if e.func == "breakTies2":
                # keep the first True along the first index, per second index
                for l in range(cols):
                    seen = False
                    for i in range(rows):
                        if out[i][l] and seen:
                            out[i][l] = False
                        seen = seen or bool(arr[i][l])
            else:
                # keep the first True along the second index, per first index
                for i in range(rows):
                    seen = False
                    for l in range(cols):
                        if out[i][l] and seen:
                            out[i][l] = False
                        seen = seen or bool(arr[i][l])
            return out
        raise InterpError("unknown call %r" % e.func)

    def reduce(self, e):
        comp = e.comp
        lo, hi = self.int_value(comp.lo), self.int_value(comp.hi)
        had = comp.var in self.env
        old = self.env.get(comp.var)
        items = []
        for v in range(lo, hi):
            self.env[comp.var] = v
            if comp.cond is None or self.eval(comp.cond) is True:
                items.append(self.eval(comp.expr))
        if had:
            self.env[comp.var] = old
        else:
            self.env.pop(comp.var, None)
        func = e.func
        if func == "reduce_and":
            return all(bool(x) for x in items)
        if func == "reduce_or":
            return any(bool(x) for x in items)
        if func == "reduce_count":
            return len(items)
        if func == "reduce_mult":
            acc = 1
            for x in items:
                acc = ext_mul(acc, x)
            return acc
        # reduce_sum: the empty sum has no contributions, hence undefined
        acc = U
        for x in items:
            acc = ext_add(acc, x)
        return acc


def interpret_user_program(program, dataset, valuation):
    """Run the user program operationally in one world; returns the final env."""
    return _Interp(dataset, valuation).run(program)
