"""Translation of user programs into immutable event programs.

Mutable user variables become versioned identifier families.  Each block
(the top level, and every loop body) gives a variable one version-path
component; within a block the component counts that block's assignments, and
inside a loop over counter ``c`` a variable with ``S`` assignment slots per
iteration gets component ``S*c + s`` for its ``s``-th slot.  Entering a block
whose body reads a variable before reassigning it emits a carry-in copy at
component ``-1`` (which is exactly what ``S*c - 1`` resolves to at the first
iteration); leaving a block appends a copy of the last inner version as the
next outer version.  The result is single-assignment by construction.

Arrays translate element-wise: a whole-array assignment opens a new version
of the family, element writes declare that version's members, and the
tie-breaking forms expand into prefix-exclusion events (the first true entry
of a tied group survives).  ``reduce_*`` calls over comprehensions expand
into n-ary connectives, sums and products; comprehension filters become
guards chosen so that a filtered-out element is neutral for the reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .events import (
    Add, And, Atom, CondVal, Dist, Guard, Inv, Mul, Not, Or, Pow, Ref,
    FALSE, TRUE,
)
from .eventprog import Affine, Decl, EventProgram, Loop, render_eid
from . import userlang as ul


class TranslateError(Exception):
    pass


OP_MAP = {"<=": "<=", ">=": ">=", "==": "=", "<": "<", ">": ">"}


def break_ties_events(family, axis=1):
    """Prefix-exclusion tie breaking over a grounded Boolean event family.

    ``family`` is a list (1-D) or list of rows (2-D) of event expressions.
    In every world at most one entry of each tied group stays true, and the
    survivor is the one with the lowest index: ``axis=1`` breaks along the
    second index (one survivor per row), ``axis=2`` along the first (one
    survivor per column).  Returns the same shape.
    """
    if family and not isinstance(family[0], (list, tuple)):
        out = []
        for j, e in enumerate(family):
            negs = tuple(Not(family[q]) for q in range(j))
            out.append(e if not negs else And(negs + (e,)))
        return out
    rows, cols = len(family), len(family[0]) if family else 0
    if any(len(r) != cols for r in family):
        raise TranslateError("tie breaking requires a rectangular family")
    out = [[None] * cols for _ in range(rows)]
    for i in range(rows):
        for l in range(cols):
            if axis == 2:
                negs = tuple(Not(family[q][l]) for q in range(i))
            elif axis == 1:
                negs = tuple(Not(family[i][q]) for q in range(l))
            else:
                raise TranslateError("axis must be 1 or 2")
            e = family[i][l]
            out[i][l] = e if not negs else And(negs + (e,))
    return out


class _VarState:
    __slots__ = ("path", "dims", "kind", "block_of")

    def __init__(self):
        self.path = []       # version components, one per block that versioned it
        self.dims = []       # array dimension sizes (ints)
        self.kind = "num"    # element kind: 'bool' | 'num' | 'vec'
        self.block_of = []   # block id per path component

    @property
    def is_array(self):
        return bool(self.dims)


@dataclass
class Translation:
    program: EventProgram
    final_paths: dict       # var -> (tuple of ints, dims, kind)
    dataset: object
    loop_final_paths: dict = field(default_factory=dict)
    # var -> path of its last version inside the outermost loop (the version
    # the trailing exit copy aliases); usable as a folded-network target

    def final_eid(self, var, *indices):
        path, _dims, _k = self.final_paths[var]
        return render_eid(var, list(path) + list(indices))

    def final_pattern(self, var):
        path, dims, _k = self.final_paths[var]
        parts = [str(c) for c in path] + ["*"] * len(dims)
        return "%s[%s]" % (var, ",".join(parts)) if parts else var

    def loop_final_pattern(self, var):
        path, dims, _k = self.loop_final_paths[var]
        parts = [str(c) for c in path] + ["*"] * len(dims)
        return "%s[%s]" % (var, ",".join(parts)) if parts else var


class _Block:
    __slots__ = ("id", "counter", "slots", "next_slot")

    def __init__(self, id, counter, slots):
        self.id = id
        self.counter = counter
        self.slots = slots
        self.next_slot = dict.fromkeys(slots, 0)

    def current_component(self, name):
        """Version component of ``name`` before its next slot in this block.

        Inside a loop with counter ``c`` and ``S`` slots per iteration this is
        ``S*c + (used - 1)``; at iteration 0 with nothing used yet it is the
        carry-in component -1.
        """
        s = self.next_slot.get(name, 0) - 1
        if self.counter is None:
            return Affine(s)
        return Affine.var(self.counter).times(self.slots[name]).plus(s)

    def take_slot(self, name):
        s = self.next_slot[name]
        self.next_slot[name] = s + 1
        if self.counter is None:
            return Affine(s)
        return Affine.var(self.counter).times(self.slots[name]).plus(s)


class _Translator:
    def __init__(self, dataset):
        self.ds = dataset
        self.consts = {}       # names with compile-time integer values
        self.vars = {}         # name -> _VarState
        self.counters = set()  # active loop counters
        self.subst = {}        # comprehension variables -> int
        self.stack = []        # active _Block chain, outermost first
        self.block_ids = 0
        self.fresh = 0

    # --- entry point ---------------------------------------------------------

    def run(self, program):
        self.loop_final = {}
        items = self.translate_block(program.items, counter=None)
        final = {}
        for name, st in self.vars.items():
            if st.path:
                final[name] = (tuple(c.eval({}) for c in st.path),
                               tuple(st.dims), st.kind)
        return Translation(EventProgram(tuple(items)), final, self.ds,
                           self.loop_final)

    # --- block machinery --------------------------------------------------------

    def translate_block(self, items, counter):
        """Translate one block; returns the emitted program items."""
        slots = {}
        for item in items:
            for v in self._versioned_by(item):
                slots[v] = slots.get(v, 0) + 1
        block = _Block(self.block_ids, counter, slots)
        self.block_ids += 1
        self.stack.append(block)
        out = []
        for item in items:
            if isinstance(item, ul.UFor):
                out.extend(self.translate_for(item, block))
            elif isinstance(item, ul.UExtCall):
                out.extend(self.bind_ext(item, block))
            else:
                out.extend(self.translate_assign(item, block))
        self.stack.pop()
        return out

    def _versioned_by(self, item):
        if isinstance(item, ul.UAssign) and isinstance(item.target, ul.UName):
            return [item.target.name]
        if isinstance(item, ul.UExtCall):
            return list(item.targets)
        if isinstance(item, ul.UFor):
            seen = {}
            def walk(its):
                for it2 in its:
                    if isinstance(it2, ul.UFor):
                        walk(it2.body)
                    else:
                        for v in self._versioned_by(it2):
                            seen[v] = True
            walk(item.body)
            return list(seen)
        return []

    def bump(self, name, block):
        """Consume an assignment slot; returns the variable's state."""
        st = self.vars.setdefault(name, _VarState())
        self._align_var(name, st)
        if not st.block_of or st.block_of[-1] != block.id:
            raise TranslateError("internal: slot for %r outside its block" % name)
        st.path[-1] = block.take_slot(name)
        return st

    def read_path(self, name):
        """Current version path for a read of ``name``."""
        st = self.vars[name]
        self._align_var(name, st)
        return st, list(st.path)

    def _align_var(self, name, st):
        """Give ``name`` a version component for every enclosing block that
        (re)assigns it, so labels from different nesting depths cannot collide
        and a first read inside a loop sees the previous iteration's version.
        """
        for j, block in enumerate(self.stack):
            if j < len(st.block_of):
                if st.block_of[j] != block.id:
                    raise TranslateError(
                        "internal: version path misaligned for %r" % name)
                continue
            if name not in block.slots:
                break
            st.path.append(block.current_component(name))
            st.block_of.append(block.id)

    def translate_for(self, item, outer):
        lo = self.const_value(item.lo, item)
        hi = self.const_value(item.hi, item)
        if hi <= lo:
            return []  # an empty loop leaves every variable untouched
        if item.var in self.counters or item.var in self.consts:
            raise TranslateError("loop counter %r shadows an existing name" % item.var)
        out = []
        versioned = self._versioned_by(item)
        carry = [v for v in versioned
                 if v in self.vars and self.vars[v].path
                 and self._reads_before_write(item.body, v)]
        for v in carry:
            st = self.vars[v]
            self._align_var(v, st)
            out.extend(self._copy_decls(v, list(st.path) + [Affine(-1)], st.path))
        self.counters.add(item.var)
        body = self.translate_block(item.body, item.var)
        self.counters.discard(item.var)
        out.append(Loop(item.var, lo, hi, tuple(body)))
        # leaving the block: copy each assigned variable's last inner version
        # into the next outer slot
        for v in versioned:
            st = self.vars.get(v)
            if st is None or len(st.block_of) <= len(self.stack):
                continue
            inner = st.path.pop()
            st.block_of.pop()
            exit_path = list(st.path) + [Affine(inner.eval({item.var: hi - 1}))]
            if len(self.stack) == 1:
                self.loop_final[v] = (tuple(c.eval({}) for c in exit_path),
                                      tuple(st.dims), st.kind)
            self.bump(v, outer)
            out.extend(self._copy_decls(v, st.path, exit_path))
        return out

    def _copy_decls(self, name, to_path, from_path):
        """Copy one version to another; arrays copy element-wise under loops."""
        st = self.vars[name]
        if not st.is_array:
            return [Decl(name, tuple(to_path), Ref(name, tuple(from_path)))]
        cs = [self.fresh_counter() for _ in st.dims]
        idx = [Affine.var(c) for c in cs]
        decl = Decl(name, tuple(list(to_path) + idx),
                    Ref(name, tuple(list(from_path) + idx)))
        item = decl
        for c, size in zip(reversed(cs), reversed(st.dims)):
            item = Loop(c, 0, size, (item,))
        return [item]

    def fresh_counter(self):
        self.fresh += 1
        return "_c%d" % self.fresh

    def _reads_before_write(self, items, var):
        for item in items:
            if isinstance(item, ul.UFor):
                if self._reads_before_write(item.body, var):
                    return True
                if var in self._versioned_by(item):
                    return False
                continue
            if isinstance(item, ul.UAssign):
                if _mentions(item.expr, var):
                    return True
                if not isinstance(item.target, ul.UName):
                    # element write: index expressions cannot read arrays
                    continue
                if item.target.name == var:
                    return False
            if isinstance(item, ul.UExtCall) and var in item.targets:
                return False
        return False

    # --- external data ------------------------------------------------------------

    def bind_ext(self, item, ctx):
        ds = self.ds
        out = []
        if item.func == "loadParams":
            names = item.targets
            if getattr(ds.params, "power", None) is not None:
                values = (ds.params.power, ds.params.iterations)
            else:
                values = (ds.params.k, ds.params.iterations)
            for n, v in zip(names, values):
                self.consts[n] = int(v)
            return out
        if item.func == "loadData":
            obj_var = item.targets[0]
            self.consts[item.targets[1]] = ds.n
            st = self.bump(obj_var, ctx)
            st.dims = [ds.n]
            st.kind = "vec"
            for l, p in enumerate(ds.points):
                event = _inline_points(p.event, ds)
                out.append(Decl(obj_var, tuple(list(st.path) + [Affine(l)]),
                                CondVal(event, tuple(p.coords))))
            if len(item.targets) == 3:
                mat_var = item.targets[2]
                if ds.matrix is None:
                    raise TranslateError("dataset has no matrix for %r" % mat_var)
                mt = self.bump(mat_var, ctx)
                mt.dims = [ds.n, ds.n]
                mt.kind = "num"
                for i in range(ds.n):
                    for j in range(ds.n):
                        out.append(Decl(
                            mat_var, tuple(list(mt.path) + [Affine(i), Affine(j)]),
                            CondVal(TRUE, float(ds.matrix[i][j]))))
            return out
        # init(): initial representatives from the configured preference chains
        var = item.targets[0]
        st = self.bump(var, ctx)
        st.dims = [ds.params.k]
        st.kind = "vec"
        obj_state = self._objects_state()
        for i in range(ds.params.k):
            chain = ds.medoid_preference(i)
            terms = []
            for r, cand in enumerate(chain):
                guards = [Not(self._obj_event(c, obj_state)) for c in chain[:r]]
                guards.append(self._obj_event(cand, obj_state))
                guard = guards[0] if len(guards) == 1 else And(tuple(guards))
                terms.append(CondVal(guard, tuple(ds.points[cand].coords)))
            expr = terms[0] if len(terms) == 1 else Add(tuple(terms))
            out.append(Decl(var, tuple(list(st.path) + [Affine(i)]), expr))
        return out

    def _objects_state(self):
        for name, st in self.vars.items():
            if st.kind == "vec" and len(st.dims) == 1 and st.dims[0] == self.ds.n:
                return name, st
        raise TranslateError("init() requires loadData() first")

    def _obj_event(self, index, obj_state):
        _name, _st = obj_state
        return _points_event(self.ds, index)

    # --- statements ----------------------------------------------------------------

    def translate_assign(self, item, ctx):
        target = item.target
        if isinstance(target, ul.UName):
            return self.whole_assign(item, ctx)
        chain = []
        base = target
        while isinstance(base, ul.UIndex):
            chain.append(base.index)
            base = base.base
        if not isinstance(base, ul.UName):
            raise TranslateError("unsupported assignment target")
        chain.reverse()
        st = self.vars.get(base.name)
        if st is None:
            raise TranslateError("array %r used before initialisation" % base.name)
        if isinstance(item.expr, ul.UArrayInit):
            size = self.const_value(item.expr.size, item)
            depth = len(chain)
            if len(st.dims) <= depth:
                st.dims = st.dims[:depth] + [size]
            elif st.dims[depth] != size:
                raise TranslateError("inconsistent size for %r" % base.name)
            return []
        st, path = self.read_path(base.name)
        idx = [self.index_expr(c) for c in chain]
        expr, kind = self.expr(item.expr)
        st.kind = kind
        return [Decl(base.name, tuple(path + idx), expr)]

    def whole_assign(self, item, ctx):
        name = item.target.name
        expr = item.expr
        if isinstance(expr, ul.ULit) and isinstance(expr.value, int) \
                and not isinstance(expr.value, bool):
            self.consts.setdefault(name, expr.value)
        if isinstance(expr, ul.UArrayInit):
            st = self.bump(name, ctx)
            st.dims = [self.const_value(expr.size, item)]
            return []
        if isinstance(expr, ul.UCall) and expr.func in ul.TIE_FUNCS:
            return self.tie_break(name, expr, ctx)
        if isinstance(expr, ul.UName) and expr.name in self.vars \
                and self.vars[expr.name].is_array:
            src, src_path = self.read_path(expr.name)
            src_dims, src_kind = list(src.dims), src.kind
            st = self.bump(name, ctx)
            st.dims = src_dims
            st.kind = src_kind
            return self._copy_decls(name, st.path, src_path)
        body, kind = self.expr(expr)
        st = self.bump(name, ctx)
        st.kind = kind
        return [Decl(name, tuple(st.path), body)]

    def tie_break(self, name, call, ctx):
        src_name = call.args[0].name
        if src_name not in self.vars or not self.vars[src_name].is_array:
            raise TranslateError("%s over a non-array" % call.func)
        src, src_path = self.read_path(src_name)
        dims = list(src.dims)
        st = self.bump(name, ctx)
        st.dims = dims
        st.kind = "bool"
        out = []
        if call.func == "breakTies":
            if len(dims) != 1:
                raise TranslateError("breakTies needs a one-dimensional array")
            for j in range(dims[0]):
                refs = [Ref(src_name, tuple(src_path + [Affine(j)]))]
                refs += [Not(Ref(src_name, tuple(src_path + [Affine(q)])))
                         for q in range(j)]
                expr = refs[0] if len(refs) == 1 else And(tuple(refs))
                out.append(Decl(name, tuple(list(st.path) + [Affine(j)]), expr))
            return out
        if len(dims) != 2:
            raise TranslateError("%s needs a two-dimensional array" % call.func)
        d0, d1 = dims
        c = self.fresh_counter()
        cv = Affine.var(c)
        if call.func == "breakTies2":
            # at most one first-index entry per second index
            for i in range(d0):
                refs = [Ref(src_name, tuple(src_path + [Affine(i), cv]))]
                refs += [Not(Ref(src_name, tuple(src_path + [Affine(q), cv])))
                         for q in range(i)]
                expr = refs[0] if len(refs) == 1 else And(tuple(refs))
                out.append(Loop(c, 0, d1,
                                (Decl(name, tuple(list(st.path) + [Affine(i), cv]),
                                      expr),)))
        else:
            # breakTies1: at most one second-index entry per first index
            for l in range(d1):
                refs = [Ref(src_name, tuple(src_path + [cv, Affine(l)]))]
                refs += [Not(Ref(src_name, tuple(src_path + [cv, Affine(q)])))
                         for q in range(l)]
                expr = refs[0] if len(refs) == 1 else And(tuple(refs))
                out.append(Loop(c, 0, d0,
                                (Decl(name, tuple(list(st.path) + [cv, Affine(l)]),
                                      expr),)))
        return out

    # --- expressions -----------------------------------------------------------------

    def const_value(self, e, where):
        if isinstance(e, ul.ULit) and isinstance(e.value, int) \
                and not isinstance(e.value, bool):
            return e.value
        if isinstance(e, ul.UName):
            if e.name in self.subst:
                return self.subst[e.name]
            if e.name in self.consts:
                return self.consts[e.name]
        raise TranslateError(
            "line %d: bound is not an integer constant" % getattr(where, "line", 0))

    def index_expr(self, e):
        if isinstance(e, ul.ULit) and isinstance(e.value, int):
            return Affine(e.value)
        if isinstance(e, ul.UName):
            if e.name in self.subst:
                return Affine(self.subst[e.name])
            if e.name in self.counters:
                return Affine.var(e.name)
            if e.name in self.consts:
                return Affine(self.consts[e.name])
            raise TranslateError("index %r is not a counter or constant" % e.name)
        if isinstance(e, ul.UBinOp):
            l, r = self.index_expr(e.left), self.index_expr(e.right)
            if e.op == "+":
                return l.plus(r)
            if l.is_const():
                return r.times(l.const)
            if r.is_const():
                return l.times(r.const)
        raise TranslateError("unsupported index expression")

    def expr(self, e):
        """Translate an expression; returns (event-or-cval, element kind)."""
        k = type(e)
        if k is ul.ULit:
            if isinstance(e.value, bool):
                return (TRUE if e.value else FALSE), "bool"
            return CondVal(TRUE, e.value), "num"
        if k is ul.UName:
            if e.name in self.subst:
                return CondVal(TRUE, self.subst[e.name]), "num"
            if e.name in self.counters:
                return CondVal(TRUE, Affine.var(e.name)), "num"
            if e.name in self.vars:
                st, path = self.read_path(e.name)
                if st.is_array:
                    raise TranslateError("array %r used as a value" % e.name)
                return Ref(e.name, tuple(path)), st.kind
            if e.name in self.consts:
                return CondVal(TRUE, self.consts[e.name]), "num"
            raise TranslateError("undefined identifier %r" % e.name)
        if k is ul.UIndex:
            chain = []
            base = e
            while isinstance(base, ul.UIndex):
                chain.append(base.index)
                base = base.base
            if not isinstance(base, ul.UName) or base.name not in self.vars:
                raise TranslateError("indexing a non-array")
            chain.reverse()
            st, path = self.read_path(base.name)
            idx = [self.index_expr(c) for c in chain]
            return Ref(base.name, tuple(path + idx)), st.kind
        if k is ul.UCompare:
            l, _ = self.cval(e.left)
            r, _ = self.cval(e.right)
            return Atom(OP_MAP[e.op], l, r), "bool"
        if k is ul.UBinOp:
            l, lk = self.cval(e.left)
            r, rk = self.cval(e.right)
            if e.op == "+":
                kind = "vec" if "vec" in (lk, rk) else "num"
                return Add((l, r)), kind
            return Mul((l, r)), "num"
        if k is ul.UCall:
            return self.call(e)
        if k is ul.UReduce:
            return self.reduce(e)
        raise TranslateError("unsupported expression %r" % (e,))

    def cval(self, e):
        out, kind = self.expr(e)
        if kind == "bool":
            raise TranslateError("Boolean value in numeric position")
        return out, kind

    def call(self, e):
        if e.func == "pow":
            c, _ = self.cval(e.args[0])
            return Pow(c, self.const_value(e.args[1], e)), "num"
        if e.func == "invert":
            c, _ = self.cval(e.args[0])
            return Inv(c), "num"
        if e.func == "dist":
            a, _ = self.cval(e.args[0])
            b, _ = self.cval(e.args[1])
            return Dist(a, b), "num"
        if e.func == "scalar_mult":
            a, _ = self.cval(e.args[0])
            b, _ = self.cval(e.args[1])
            return Mul((a, b)), "vec"
        raise TranslateError("call %r not valid in expressions" % e.func)

    def reduce(self, e):
        comp = e.comp
        lo = self.const_value(comp.lo, comp)
        hi = self.const_value(comp.hi, comp)
        if comp.var in self.subst or comp.var in self.counters:
            raise TranslateError("comprehension variable %r shadows" % comp.var)
        parts = []
        kind = "num"
        for v in range(lo, hi):
            self.subst[comp.var] = v
            cond = None
            if comp.cond is not None:
                cond, ck = self.expr(comp.cond)
                if ck != "bool":
                    raise TranslateError("comprehension filter is not Boolean")
            body, kind = self.expr(comp.expr)
            parts.append((cond, body))
            del self.subst[comp.var]
        func = e.func
        if func == "reduce_and":
            if not parts:
                return TRUE, "bool"
            items = tuple(b if c is None else Or((Not(c), b)) for c, b in parts)
            return (items[0] if len(items) == 1 else And(items)), "bool"
        if func == "reduce_or":
            if not parts:
                return FALSE, "bool"
            items = tuple(b if c is None else And((c, b)) for c, b in parts)
            return (items[0] if len(items) == 1 else Or(items)), "bool"
        if func == "reduce_count":
            if not parts:
                return CondVal(FALSE, 0), "num"
            items = tuple(CondVal(TRUE if c is None else c, 1) for c, _ in parts)
            return Add(items), "num"
        if func == "reduce_mult":
            if not parts:
                return CondVal(TRUE, 1), "num"
            items = []
            for c, b in parts:
                if c is None:
                    items.append(b)
                else:
                    # filtered-out factors are neutral: (cond and value) + (!cond ? 1)
                    items.append(Add((Guard(c, b), CondVal(Not(c), 1))))
            return Mul(tuple(items)), "num"
        # reduce_sum
        if not parts:
            return CondVal(FALSE, 0), kind
        items = tuple(b if c is None else Guard(c, b) for c, b in parts)
        return Add(items), kind


def _mentions(e, var):
    k = type(e)
    if k is ul.UName:
        return e.name == var
    if k is ul.ULit:
        return False
    if k is ul.UIndex:
        return _mentions(e.base, var) or _mentions(e.index, var)
    if k is ul.UCompare or k is ul.UBinOp:
        return _mentions(e.left, var) or _mentions(e.right, var)
    if k is ul.UArrayInit:
        return _mentions(e.size, var)
    if k is ul.UCall:
        return any(_mentions(a, var) for a in e.args)
    if k is ul.UReduce:
        return _mentions(e.comp, var)
    if k is ul.UComprehension:
        if _mentions(e.expr, var) or _mentions(e.lo, var) or _mentions(e.hi, var):
            return True
        return e.cond is not None and _mentions(e.cond, var)
    return False


def _points_event(dataset, index):
    return _inline_points(dataset.points[index].event, dataset)


def _inline_points(e, dataset):
    env = dataset.event_env()
    if isinstance(e, Ref):
        return _inline_points(env[e.name], dataset)
    if isinstance(e, Not):
        return Not(_inline_points(e.child, dataset))
    if isinstance(e, And):
        return And(tuple(_inline_points(c, dataset) for c in e.children))
    if isinstance(e, Or):
        return Or(tuple(_inline_points(c, dataset) for c in e.children))
    return e


def translate_to_event_program(program, dataset):
    """Translate a validated user program against a dataset binding."""
    diags = ul.validate_user_program(program)
    hard = [d for d in diags if d.rule not in ()]
    if hard:
        raise TranslateError("program does not validate: %s" %
                             "; ".join(str(d) for d in hard))
    return _Translator(dataset).run(program)
