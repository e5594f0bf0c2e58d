"""Event programs: ordered immutable declarations, bounded loops, grounding.

A program is a sequence of declarations ``EID := expr`` and ``forall`` loops
with constant bounds.  Identifiers may carry index expressions that are affine
in the enclosing loop counters (``M[i,it-1]``, ``M[1,2*i+1]``).  Grounding
instantiates every loop, evaluates the index arithmetic and yields an ordered
map from grounded identifier strings to expressions whose references point at
earlier grounded identifiers.

The textual format (one declaration per line, loops by indentation) is both
accepted and emitted:

    Obj[0] := x1 | x3
    O[0] := Obj[0] ? [0.0]
    forall it in 0..2:          # iterates it = 0, 1  (upper bound exclusive)
      InCl[0,it] := Obj[0] & [ dist(O[0], M[0,it-1]) <= dist(O[0], M[1,it-1]) ]

Event syntax: ``|``, ``&``, ``!``, ``true``, ``false``, ``[ cval cmp cval ]``
atoms, and ``all(j,lo,hi,e)`` / ``any(j,lo,hi,e)`` bounded folds (expanded at
parse time).  C-value syntax: ``event ? value`` guards (value: number, vector
``[x,y]``, or parenthesised c-value), ``+``, ``*``, ``inv(c)``, ``pow(c,n)``,
``dist(c,c)`` and ``sum(j,lo,hi,c)`` / ``prod(j,lo,hi,c)`` folds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .events import (
    Add, And, Atom, CondVal, Const, Dist, Guard, Inv, Mul, Not, Or, Pow, Ref,
    Var, FALSE, TRUE, COMPARATORS, infer_kind,
)


class GroundError(Exception):
    """Grounding failure: duplicate, unresolved or cyclic identifiers."""


class ProgramSyntaxError(Exception):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)


# ---------------------------------------------------------------------------
# Affine index expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Affine:
    """Integer expression  const + sum(coef * counter)  over loop counters."""

    const: int = 0
    terms: tuple = ()  # sorted tuple of (counter_name, coef), coef != 0

    @classmethod
    def of(cls, const=0, **coefs):
        terms = tuple(sorted((n, c) for n, c in coefs.items() if c != 0))
        return cls(const, terms)

    @classmethod
    def var(cls, name):
        return cls(0, ((name, 1),))

    def is_const(self):
        return not self.terms

    def shift(self, name, delta):
        """Substitute counter := counter + delta."""
        coef = dict(self.terms).get(name, 0)
        if coef == 0:
            return self
        return Affine(self.const + coef * delta, self.terms)

    def plus(self, other):
        if isinstance(other, int):
            return Affine(self.const + other, self.terms)
        coefs = dict(self.terms)
        for n, c in other.terms:
            coefs[n] = coefs.get(n, 0) + c
        terms = tuple(sorted((n, c) for n, c in coefs.items() if c != 0))
        return Affine(self.const + other.const, terms)

    def times(self, k):
        return Affine(self.const * k, tuple((n, c * k) for n, c in self.terms))

    def eval(self, env):
        value = self.const
        for name, coef in self.terms:
            if name not in env:
                raise GroundError("unbound loop counter %r" % name)
            value += coef * env[name]
        return value

    def counters(self):
        return [n for n, _ in self.terms]

    def __str__(self):
        parts = []
        for name, coef in self.terms:
            if coef == 1:
                parts.append(name)
            elif coef == -1:
                parts.append("-" + name)
            else:
                parts.append("%d*%s" % (coef, name))
        if self.const or not parts:
            parts.append(str(self.const))
        out = parts[0]
        for p in parts[1:]:
            out += p if p.startswith("-") else "+" + p
        return out


def as_affine(x):
    if isinstance(x, Affine):
        return x
    if isinstance(x, int):
        return Affine(x)
    if isinstance(x, str):
        return Affine.var(x)
    raise TypeError("not an index expression: %r" % (x,))


# ---------------------------------------------------------------------------
# Program structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decl:
    name: str
    indices: tuple  # tuple of Affine
    expr: object

    def eid_under(self, env):
        return render_eid(self.name, [ix.eval(env) for ix in self.indices])


@dataclass(frozen=True)
class Loop:
    counter: str
    lo: int
    hi: int  # exclusive
    body: tuple


@dataclass(frozen=True)
class EventProgram:
    items: tuple


def render_eid(name, indices):
    if not indices:
        return name
    return "%s[%s]" % (name, ",".join(str(int(i)) for i in indices))


def decl(name, indices, expr):
    return Decl(name, tuple(as_affine(i) for i in indices), expr)


def ref(name, *indices):
    return Ref(name, tuple(as_affine(i) for i in indices))


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------


@dataclass
class GroundedProgram:
    """Ordered grounded declarations plus the selected compilation targets."""

    decls: dict  # eid -> expression (references are grounded Refs)
    targets: list = field(default_factory=list)
    kinds: dict = field(default_factory=dict)  # eid -> 'b' | 's' | 'v'

    def env(self):
        return self.decls

    def order(self):
        return list(self.decls.keys())


def glob_to_regex(pattern):
    """Glob with ``*`` and ``?`` wildcards; everything else literal."""
    out = []
    for ch in pattern:
        if ch == "*":
            out.append(".*")
        elif ch == "?":
            out.append(".")
        else:
            out.append(re.escape(ch))
    return re.compile("^" + "".join(out) + "$")


def _ground_expr(e, env, declared, variables):
    kind = type(e)
    if kind is Ref:
        if e.indices:
            eid = render_eid(e.name, [as_affine(ix).eval(env) for ix in e.indices])
            if eid not in declared:
                raise GroundError("unresolved reference %r" % eid)
            return Ref(eid)
        if e.name in declared:
            return Ref(e.name)
        if variables is None or e.name in variables:
            # bare undeclared name: a random variable
            return Var(e.name)
        raise GroundError("unresolved reference %r" % e.name)
    if kind is Var:
        if variables is not None and e.name not in variables:
            if e.name in declared:
                return Ref(e.name)
            raise GroundError("unresolved variable %r" % e.name)
        return e
    if kind is Const:
        return e
    if kind is CondVal:
        value = e.value
        if isinstance(value, Affine):
            value = value.eval(env)
        return CondVal(_ground_expr(e.guard, env, declared, variables), value)
    if kind is Not:
        return Not(_ground_expr(e.child, env, declared, variables))
    if kind is And:
        return And(tuple(_ground_expr(c, env, declared, variables) for c in e.children))
    if kind is Or:
        return Or(tuple(_ground_expr(c, env, declared, variables) for c in e.children))
    if kind is Atom:
        return Atom(e.op, _ground_expr(e.left, env, declared, variables),
                    _ground_expr(e.right, env, declared, variables))
    if kind is Guard:
        return Guard(_ground_expr(e.guard, env, declared, variables),
                     _ground_expr(e.body, env, declared, variables))
    if kind is Add:
        return Add(tuple(_ground_expr(c, env, declared, variables) for c in e.children))
    if kind is Mul:
        return Mul(tuple(_ground_expr(c, env, declared, variables) for c in e.children))
    if kind is Inv:
        return Inv(_ground_expr(e.child, env, declared, variables))
    if kind is Pow:
        return Pow(_ground_expr(e.child, env, declared, variables), e.exponent)
    if kind is Dist:
        return Dist(_ground_expr(e.left, env, declared, variables),
                    _ground_expr(e.right, env, declared, variables))
    raise TypeError("not an expression: %r" % (e,))


def ground(program, target_patterns=("*",), variables=None):
    """Instantiate all loops and resolve every reference.

    ``variables``: optional set of known random-variable names.  When given,
    bare names must resolve either to a declaration or to a variable; when
    omitted, undeclared bare names are assumed to be variables.
    """
    decls = {}
    kinds = {}

    def run(items, env):
        for item in items:
            if isinstance(item, Loop):
                for v in range(item.lo, item.hi):
                    env2 = dict(env)
                    env2[item.counter] = v
                    run(item.body, env2)
            else:
                eid = item.eid_under(env)
                if eid in decls:
                    raise GroundError("identifier %r assigned twice" % eid)
                grounded = _ground_expr(item.expr, env, decls, variables)
                decls[eid] = grounded
                kinds[eid] = infer_kind(grounded, kinds)

    run(program.items, {})
    targets = match_targets(decls.keys(), target_patterns)
    return GroundedProgram(decls, targets, kinds)


def match_targets(eids, patterns):
    if isinstance(patterns, str):
        patterns = (patterns,)
    targets = []
    seen = set()
    for pat in patterns:
        rx = glob_to_regex(pat)
        hits = [e for e in eids if rx.match(e)]
        if not hits:
            raise GroundError("target pattern %r matches no declaration" % pat)
        for e in hits:
            if e not in seen:
                seen.add(e)
                targets.append(e)
    return targets


# ---------------------------------------------------------------------------
# Folded grounding: the outermost loop stays symbolic
# ---------------------------------------------------------------------------


@dataclass
class FoldedProgram:
    """Grounding that keeps the outermost loop's counter symbolic.

    ``base`` holds the grounded declarations outside the loop; ``body`` holds
    the loop body instantiated over all inner counters, with indices still
    affine in the loop counter.  References in body expressions resolve either
    to the same iteration, to the previous one, or to base declarations.
    """

    counter: str
    count: int
    base: dict  # eid -> grounded expr
    body: list  # list of (name, indices tuple of Affine, expr)
    targets: list = field(default_factory=list)  # body positions, final iteration
    kinds: dict = field(default_factory=dict)

    def body_eid(self, entry, t):
        name, indices, _ = entry
        return render_eid(name, [ix.eval({self.counter: t}) for ix in indices])


def ground_folded(program, target_patterns=("*",), variables=None):
    """Ground for folded-loop evaluation.

    The iteration dimension is the top-level loop with the most declarations;
    everything before it (other loops included) grounds into the base layer.
    Declarations after it cannot be represented in a folded network: they are
    omitted, and selecting them as targets is an error.
    """
    def weight(item):
        if isinstance(item, Loop):
            return sum(weight(b) for b in item.body) * max(item.hi - item.lo, 1)
        return 1

    loops = [it for it in program.items if isinstance(it, Loop)]
    if not loops:
        raise GroundError("folded grounding requires a top-level loop")
    loop = max(loops, key=weight)
    split = program.items.index(loop)
    trailing = program.items[split + 1:]
    base = ground(EventProgram(program.items[:split]), (), variables)
    if trailing:
        tail_names = []

        def collect(items, env):
            for item in items:
                if isinstance(item, Loop):
                    for v in range(item.lo, item.hi):
                        env2 = dict(env)
                        env2[item.counter] = v
                        collect(item.body, env2)
                else:
                    tail_names.append(item.eid_under(env))

        collect(trailing, {})
        for pat in ([target_patterns] if isinstance(target_patterns, str)
                    else target_patterns):
            rx = glob_to_regex(pat)
            for eid in tail_names:
                if rx.match(eid):
                    raise GroundError(
                        "folded target %r lies after the folded loop" % eid)

    body = []
    kinds = dict(base.kinds)

    def run(items, env):
        for item in items:
            if isinstance(item, Loop):
                for v in range(item.lo, item.hi):
                    env2 = dict(env)
                    env2[item.counter] = v
                    run(item.body, env2)
            else:
                indices = tuple(_partial_eval(ix, env, loop.counter) for ix in item.indices)
                expr = _partial_ground(item.expr, env, loop.counter)
                body.append((item.name, indices, expr))

    run(loop.body, {})
    if loop.lo != 0:
        raise GroundError("folded loops must start at 0")
    for name, indices, expr in body:
        eid0 = render_eid(name, [ix.eval({loop.counter: loop.lo}) for ix in indices])
        if eid0 in base.decls:
            raise GroundError("identifier %r assigned twice" % eid0)
    prog = FoldedProgram(loop.counter, loop.hi - loop.lo, base.decls, body, [], kinds)

    # Resolve target patterns against the final iteration plus base decls.
    final_eids = {prog.body_eid(entry, prog.count - 1): i for i, entry in enumerate(prog.body)}
    all_names = list(base.decls.keys()) + list(final_eids.keys())
    chosen = match_targets(all_names, target_patterns)
    for eid in chosen:
        if eid not in final_eids:
            raise GroundError(
                "folded target %r is not a final-iteration declaration" % eid)
    prog.targets = [final_eids[e] for e in chosen]
    return prog


def _family_key(name, indices):
    return (name, tuple(str(i) for i in indices))


def _partial_eval(ix, env, keep):
    """Evaluate an index expression over ``env``, keeping ``keep`` symbolic."""
    ix = as_affine(ix)
    const = ix.const
    kept = []
    for name, coef in ix.terms:
        if name == keep:
            kept.append((name, coef))
        else:
            if name not in env:
                raise GroundError("unbound loop counter %r" % name)
            const += coef * env[name]
    return Affine(const, tuple(kept))


def _partial_ground(e, env, keep):
    kind = type(e)
    if kind is Ref:
        return Ref(e.name, tuple(_partial_eval(ix, env, keep) for ix in e.indices))
    if kind in (Var, Const):
        return e
    if kind is CondVal:
        value = e.value
        if isinstance(value, Affine):
            value = _partial_eval(value, env, keep)
            if value.is_const():
                value = value.const
        return CondVal(_partial_ground(e.guard, env, keep), value)
    if kind is Not:
        return Not(_partial_ground(e.child, env, keep))
    if kind is And:
        return And(tuple(_partial_ground(c, env, keep) for c in e.children))
    if kind is Or:
        return Or(tuple(_partial_ground(c, env, keep) for c in e.children))
    if kind is Atom:
        return Atom(e.op, _partial_ground(e.left, env, keep),
                    _partial_ground(e.right, env, keep))
    if kind is Guard:
        return Guard(_partial_ground(e.guard, env, keep),
                     _partial_ground(e.body, env, keep))
    if kind is Add:
        return Add(tuple(_partial_ground(c, env, keep) for c in e.children))
    if kind is Mul:
        return Mul(tuple(_partial_ground(c, env, keep) for c in e.children))
    if kind is Inv:
        return Inv(_partial_ground(e.child, env, keep))
    if kind is Pow:
        return Pow(_partial_ground(e.child, env, keep), e.exponent)
    if kind is Dist:
        return Dist(_partial_ground(e.left, env, keep),
                    _partial_ground(e.right, env, keep))
    raise TypeError("not an expression: %r" % (e,))


# ---------------------------------------------------------------------------
# Textual format: parser
# ---------------------------------------------------------------------------

_TOKEN_RX = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|\.\.|:=|[-+*?&|!<>=\[\](),:]))"
)


def _tokenize_line(text, lineno):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN_RX.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ProgramSyntaxError("unexpected character %r" % text[pos], lineno)
        if m.lastgroup == "num":
            tok = m.group("num")
            out.append(("num", float(tok) if "." in tok else int(tok)))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name")))
        else:
            op = m.group("op")
            out.append(("op", "=" if op == "==" else op))
        pos = m.end()
    return out


class _LineParser:
    """Parses one declaration's right-hand side."""

    def __init__(self, tokens, lineno, counters):
        self.toks = tokens
        self.i = 0
        self.lineno = lineno
        self.counters = counters  # active loop counter names

    def error(self, msg):
        raise ProgramSyntaxError(msg, self.lineno)

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", None)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op):
        t, v = self.next()
        if t != "op" or v != op:
            self.error("expected %r, found %r" % (op, v))

    def at_op(self, op):
        t, v = self.peek()
        return t == "op" and v == op

    def eat_op(self, op):
        if self.at_op(op):
            self.i += 1
            return True
        return False

    # --- events -----------------------------------------------------------

    def parse_event(self):
        e = self.parse_conj()
        parts = [e]
        while self.eat_op("|"):
            parts.append(self.parse_conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_conj(self):
        parts = [self.parse_neg()]
        while self.eat_op("&"):
            parts.append(self.parse_neg())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_neg(self):
        if self.eat_op("!"):
            return Not(self.parse_neg())
        return self.parse_event_primary()

    def parse_event_primary(self):
        t, v = self.peek()
        if t == "op" and v == "(":
            self.next()
            e = self.parse_event()
            self.expect_op(")")
            return self._maybe_guard(e)
        if t == "op" and v == "[":
            return self.parse_atom()
        if t == "name":
            if v == "true":
                self.next()
                return TRUE
            if v == "false":
                self.next()
                return FALSE
            if v == "all" or v == "any":
                return self.parse_event_fold(v)
            self.next()
            indices = self.parse_indices()
            return self._maybe_guard(Ref(v, indices))
        self.error("expected an event, found %r" % (v,))

    def _maybe_guard(self, e):
        # Inside c-value context a guard may follow; handled by parse_cval.
        return e

    def parse_event_fold(self, which):
        self.next()
        self.expect_op("(")
        saved = self.counters
        counter, lo, hi = self.parse_fold_header()
        body = self.parse_event()
        self.expect_op(")")
        self.counters = saved
        exprs = tuple(_subst_counter(body, counter, v) for v in range(lo, hi))
        if not exprs:
            return TRUE if which == "all" else FALSE
        return And(exprs) if which == "all" else Or(exprs)

    def parse_fold_header(self):
        t, counter = self.next()
        if t != "name":
            self.error("fold counter expected")
        self.expect_op(",")
        lo = self.parse_index_expr()
        self.expect_op(",")
        hi = self.parse_index_expr()
        self.expect_op(",")
        if not lo.is_const() or not hi.is_const():
            self.error("fold bounds must be constant")
        self.counters = dict(self.counters)
        self.counters[counter] = None
        return counter, lo.const, hi.const

    def parse_atom(self):
        self.expect_op("[")
        left = self.parse_cval()
        t, v = self.next()
        if t != "op" or v not in COMPARATORS:
            self.error("expected comparator, found %r" % (v,))
        right = self.parse_cval()
        self.expect_op("]")
        return Atom(v, left, right)

    # --- c-values ----------------------------------------------------------

    def parse_cval(self):
        parts = [self.parse_cval_term()]
        while self.eat_op("+"):
            parts.append(self.parse_cval_term())
        return parts[0] if len(parts) == 1 else Add(tuple(parts))

    def parse_cval_term(self):
        parts = [self.parse_cval_primary()]
        while self.eat_op("*"):
            parts.append(self.parse_cval_primary())
        return parts[0] if len(parts) == 1 else Mul(tuple(parts))

    def parse_cval_primary(self):
        t, v = self.peek()
        if t == "num" or (t == "op" and v == "-"):
            return CondVal(TRUE, self.parse_number())
        if t == "op" and v == "[":
            return CondVal(TRUE, self.parse_vector())
        if t == "name" and v == "inv":
            self.next()
            self.expect_op("(")
            c = self.parse_cval()
            self.expect_op(")")
            return Inv(c)
        if t == "name" and v == "pow":
            self.next()
            self.expect_op("(")
            c = self.parse_cval()
            self.expect_op(",")
            n = self.parse_number()
            self.expect_op(")")
            if not isinstance(n, int):
                self.error("power exponent must be an integer")
            return Pow(c, n)
        if t == "name" and v == "dist":
            self.next()
            self.expect_op("(")
            a = self.parse_cval()
            self.expect_op(",")
            b = self.parse_cval()
            self.expect_op(")")
            return Dist(a, b)
        if t == "name" and v in ("sum", "prod"):
            return self.parse_cval_fold(v)
        # otherwise: an event followed by '?', or a parenthesised c-value
        return self.parse_guarded()

    def parse_cval_fold(self, which):
        self.next()
        self.expect_op("(")
        saved = self.counters
        counter, lo, hi = self.parse_fold_header()
        body = self.parse_cval()
        self.expect_op(")")
        self.counters = saved
        exprs = tuple(_subst_counter(body, counter, v) for v in range(lo, hi))
        if not exprs:
            # empty sum is undefined, empty product is one
            if which == "sum":
                return CondVal(FALSE, 0)
            return CondVal(TRUE, 1)
        return Add(exprs) if which == "sum" else Mul(exprs)

    def parse_guarded(self):
        if self.at_op("("):
            # Could be "(event) ? value" or a parenthesised c-value.
            saved = self.i
            self.next()
            try:
                inner = self.parse_cval()
                self.expect_op(")")
                return inner
            except ProgramSyntaxError:
                self.i = saved
            self.next()
            guard = self.parse_event()
            self.expect_op(")")
            self.expect_op("?")
            return self._guard_body(guard)
        guard = self.parse_event()
        if self.eat_op("?"):
            return self._guard_body(guard)
        if isinstance(guard, Ref):
            return guard  # reference to a c-value declaration
        self.error("expected '?' after event in c-value position")

    def _guard_body(self, guard):
        t, v = self.peek()
        if t == "num" or (t == "op" and v in ("-", "[")):
            return CondVal(guard, self.parse_value())
        if t == "name" and v in self.counters:
            # counter-valued constant, e.g.  true ? i
            self.next()
            return CondVal(guard, Affine.var(v))
        body = self.parse_cval_primary()
        if isinstance(body, CondVal) and body.guard is TRUE:
            return CondVal(guard, body.value)
        return Guard(guard, body)

    def parse_value(self):
        t, v = self.peek()
        if t == "op" and v == "[":
            return self.parse_vector()
        return self.parse_number()

    def parse_number(self):
        neg = self.eat_op("-")
        t, v = self.next()
        if t != "num":
            self.error("expected a number, found %r" % (v,))
        return -v if neg else v

    def parse_vector(self):
        self.expect_op("[")
        values = [self.parse_number()]
        while self.eat_op(","):
            values.append(self.parse_number())
        self.expect_op("]")
        return tuple(float(x) for x in values)

    def parse_decl_body(self):
        """RHS of a declaration: try c-value syntax first, fall back to event."""
        saved = self.i
        try:
            c = self.parse_cval()
            if self.peek()[0] == "eof":
                return c
        except ProgramSyntaxError:
            pass
        self.i = saved
        return self.parse_event()

    # --- indices ------------------------------------------------------------

    def parse_indices(self):
        if not self.at_op("["):
            return ()
        self.next()
        out = [self.parse_index_expr()]
        while self.eat_op(","):
            out.append(self.parse_index_expr())
        self.expect_op("]")
        return tuple(out)

    def parse_index_expr(self):
        e = self.parse_index_term()
        while True:
            if self.eat_op("+"):
                e = e.plus(self.parse_index_term())
            elif self.eat_op("-"):
                e = e.plus(self.parse_index_term().times(-1))
            else:
                return e

    def parse_index_term(self):
        if self.eat_op("-"):
            return self.parse_index_term().times(-1)
        t, v = self.next()
        if t == "num":
            if not isinstance(v, int):
                self.error("index must be an integer")
            value = Affine(v)
        elif t == "name":
            if v not in self.counters:
                self.error("unknown loop counter %r in index" % v)
            value = Affine.var(v)
        else:
            self.error("bad index expression near %r" % (v,))
        if self.eat_op("*"):
            t2, v2 = self.next()
            if t == "num" and t2 == "name":
                if v2 not in self.counters:
                    self.error("unknown loop counter %r in index" % v2)
                return Affine.var(v2).times(value.const)
            if t2 == "num" and isinstance(v2, int):
                return value.times(v2)
            self.error("bad index product")
        return value


def _subst_counter(e, counter, value):
    """Replace one counter with a constant inside index expressions."""
    def fix_aff(a):
        if isinstance(a, Affine):
            coef = dict(a.terms).get(counter, 0)
            if coef:
                return Affine(a.const + coef * value,
                              tuple((n, c) for n, c in a.terms if n != counter))
        return a

    kind = type(e)
    if kind is Ref:
        return Ref(e.name, tuple(fix_aff(ix) for ix in e.indices))
    if kind in (Var, Const):
        return e
    if kind is CondVal:
        return CondVal(_subst_counter(e.guard, counter, value), fix_aff(e.value))
    if kind is Not:
        return Not(_subst_counter(e.child, counter, value))
    if kind is And:
        return And(tuple(_subst_counter(c, counter, value) for c in e.children))
    if kind is Or:
        return Or(tuple(_subst_counter(c, counter, value) for c in e.children))
    if kind is Atom:
        return Atom(e.op, _subst_counter(e.left, counter, value),
                    _subst_counter(e.right, counter, value))
    if kind is Guard:
        return Guard(_subst_counter(e.guard, counter, value),
                     _subst_counter(e.body, counter, value))
    if kind is Add:
        return Add(tuple(_subst_counter(c, counter, value) for c in e.children))
    if kind is Mul:
        return Mul(tuple(_subst_counter(c, counter, value) for c in e.children))
    if kind is Inv:
        return Inv(_subst_counter(e.child, counter, value))
    if kind is Pow:
        return Pow(_subst_counter(e.child, counter, value), e.exponent)
    if kind is Dist:
        return Dist(_subst_counter(e.left, counter, value),
                    _subst_counter(e.right, counter, value))
    raise TypeError("not an expression: %r" % (e,))


def parse_event_program(text):
    """Parse the line-oriented event program format."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        indent = len(stripped) - len(stripped.lstrip())
        lines.append((lineno, indent, stripped.strip()))

    pos = 0

    def parse_block(indent, counters):
        nonlocal pos
        items = []
        while pos < len(lines):
            lineno, ind, text_line = lines[pos]
            if ind < indent:
                break
            if ind > indent:
                raise ProgramSyntaxError("unexpected indentation", lineno)
            m = re.match(
                r"forall\s+([A-Za-z_][A-Za-z0-9_]*)\s+in\s+(-?\d+)\s*\.\.\s*(-?\d+)\s*:$",
                text_line)
            if m:
                pos += 1
                counter, lo, hi = m.group(1), int(m.group(2)), int(m.group(3))
                sub = dict(counters)
                sub[counter] = None
                if pos < len(lines) and lines[pos][1] > indent:
                    body = parse_block(lines[pos][1], sub)
                else:
                    body = []
                items.append(Loop(counter, lo, hi, tuple(body)))
                continue
            if ":=" not in text_line:
                raise ProgramSyntaxError("expected 'EID := expr'", lineno)
            lhs_text, rhs_text = text_line.split(":=", 1)
            lp = _LineParser(_tokenize_line(lhs_text, lineno), lineno, counters)
            t, name = lp.next()
            if t != "name":
                raise ProgramSyntaxError("bad declaration head", lineno)
            indices = lp.parse_indices()
            if lp.peek()[0] != "eof":
                raise ProgramSyntaxError("trailing tokens in declaration head", lineno)
            rp = _LineParser(_tokenize_line(rhs_text, lineno), lineno, counters)
            expr = rp.parse_decl_body()
            if rp.peek()[0] != "eof":
                raise ProgramSyntaxError("trailing tokens after expression", lineno)
            items.append(Decl(name, indices, expr))
            pos += 1
        return items

    items = parse_block(lines[0][1] if lines else 0, {})
    if pos != len(lines):
        raise ProgramSyntaxError("dedent below program level", lines[pos][0])
    return EventProgram(tuple(items))


# ---------------------------------------------------------------------------
# Textual format: emitter
# ---------------------------------------------------------------------------


def _fmt_value(v):
    if isinstance(v, tuple):
        return "[%s]" % ", ".join(repr(float(x)) for x in v)
    if isinstance(v, Affine):
        return str(v)
    if isinstance(v, bool):
        raise TypeError("boolean in value position")
    if isinstance(v, float) and v.is_integer():
        return repr(v)
    return repr(v)


def format_expr(e):
    kind = type(e)
    if kind is Const:
        return "true" if e.value else "false"
    if kind is Var:
        return e.name
    if kind is Ref:
        if not e.indices:
            return e.name
        return "%s[%s]" % (e.name, ",".join(str(as_affine(i)) for i in e.indices))
    if kind is Not:
        return "!%s" % _wrap(e.child, (Or, And))
    if kind is And:
        return " & ".join(_wrap(c, (Or, And)) for c in e.children)
    if kind is Or:
        return " | ".join(_wrap(c, (Or,)) for c in e.children)
    if kind is Atom:
        return "[ %s %s %s ]" % (format_expr(e.left), e.op, format_expr(e.right))
    if kind is CondVal:
        return "(%s ? %s)" % (format_expr(e.guard), _fmt_value(e.value))
    if kind is Guard:
        return "(%s ? (%s))" % (format_expr(e.guard), format_expr(e.body))
    if kind is Add:
        return " + ".join(_wrap(c, (Add,)) for c in e.children)
    if kind is Mul:
        return " * ".join(_wrap(c, (Add, Mul)) for c in e.children)
    if kind is Inv:
        return "inv(%s)" % format_expr(e.child)
    if kind is Pow:
        return "pow(%s, %d)" % (format_expr(e.child), e.exponent)
    if kind is Dist:
        return "dist(%s, %s)" % (format_expr(e.left), format_expr(e.right))
    raise TypeError("not an expression: %r" % (e,))


def _wrap(e, ambient):
    text = format_expr(e)
    if isinstance(e, ambient):
        return "(%s)" % text
    return text


def emit_event_program(program):
    out = []

    def emit(items, depth):
        pad = "  " * depth
        for item in items:
            if isinstance(item, Loop):
                out.append("%sforall %s in %d..%d:" % (pad, item.counter, item.lo, item.hi))
                emit(item.body, depth + 1)
            else:
                head = item.name
                if item.indices:
                    head += "[%s]" % ",".join(str(ix) for ix in item.indices)
                out.append("%s%s := %s" % (pad, head, format_expr(item.expr)))

    emit(program.items, 0)
    return "\n".join(out) + "\n"


def emit_grounded(grounded):
    out = []
    for eid, expr in grounded.decls.items():
        out.append("%s := %s" % (eid, format_expr(expr)))
    return "\n".join(out) + "\n"
