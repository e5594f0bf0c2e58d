"""Core event algebra: Boolean events over random variables and conditional values.

An event is a propositional formula over independent Boolean random variables,
named event identifiers (EIDs) and comparison atoms.  A conditional value
(c-value) is a number or feature vector guarded by an event: it takes its
value in worlds where the guard holds and a distinguished *undefined* element
otherwise.  Scalars are extended with the undefined element ``U`` and vectors
with ``VU``; the arithmetic below absorbs or ignores them so that every
well-typed expression evaluates totally in every world:

    U + x == x          VU + xs == xs
    U * x == U          U * xs == VU        a * VU == VU        VU * xs == U
    inv(0) == U         comparisons with an undefined operand are True

A total assignment of the random variables (a *world*) plus these rules give
each expression a single value; weighting worlds by the variable table turns
every expression into a random variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union


class EventError(Exception):
    """Base class for evaluation and resolution errors."""


class ResolutionError(EventError):
    """Unresolved variable or event identifier."""


class CycleError(EventError):
    """Event identifier references form a cycle."""


class TypeMismatch(EventError):
    """Ill-typed c-value expression (e.g. dist on scalars)."""


class _Undefined:
    __slots__ = ("_tag",)

    def __init__(self, tag):
        self._tag = tag

    def __repr__(self):
        return self._tag


#: Undefined scalar (absorbing for *, neutral for +).
U = _Undefined("U")
#: Undefined feature vector.
VU = _Undefined("VU")

Scalar = Union[int, float]
Vector = tuple
ExtValue = Union[Scalar, Vector, _Undefined]


def is_vector_like(v):
    return isinstance(v, tuple) or v is VU


def undef_like(v):
    return VU if is_vector_like(v) else U


def ext_add(a, b):
    """Extended addition: undefined operands contribute nothing."""
    if a is U or a is VU:
        return b
    if b is U or b is VU:
        return a
    if isinstance(a, tuple) and isinstance(b, tuple):
        if len(a) != len(b):
            raise TypeMismatch("vector dimensions differ: %d vs %d" % (len(a), len(b)))
        return tuple(x + y for x, y in zip(a, b))
    if isinstance(a, tuple) or isinstance(b, tuple):
        raise TypeMismatch("cannot add scalar and vector")
    return a + b


def ext_mul(a, b):
    """Extended multiplication: undefined absorbs, typed by the operand kinds.

    scalar*scalar -> scalar, scalar*vector -> scaled vector,
    vector*vector -> dot product (scalar).
    """
    a_vec, b_vec = is_vector_like(a), is_vector_like(b)
    out_vec = a_vec != b_vec
    if a is U or b is U or a is VU or b is VU:
        return VU if out_vec else U
    if a_vec and b_vec:
        if len(a) != len(b):
            raise TypeMismatch("vector dimensions differ in product")
        return sum(x * y for x, y in zip(a, b))
    if a_vec:
        return tuple(x * b for x in a)
    if b_vec:
        return tuple(a * y for y in b)
    return a * b


def ext_inv(a):
    if a is U:
        return U
    if is_vector_like(a):
        raise TypeMismatch("inverse of a vector")
    if a == 0:
        return U
    return 1.0 / a


def ext_pow(a, n):
    if a is U:
        return U
    if is_vector_like(a):
        raise TypeMismatch("power of a vector")
    if n < 0:
        if a == 0:
            return U
        return float(a) ** n
    return a ** n


def ext_dist(a, b):
    """Euclidean distance; undefined as soon as either operand is."""
    if a is U or a is VU or b is U or b is VU:
        return U
    if not (isinstance(a, tuple) and isinstance(b, tuple)):
        raise TypeMismatch("dist requires vector operands")
    if len(a) != len(b):
        raise TypeMismatch("vector dimensions differ in dist")
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


COMPARATORS = ("<=", ">=", "=", "<", ">")


def ext_compare(op, a, b):
    """Comparison of two extended values; true if either side is undefined."""
    if a is U or a is VU or b is U or b is VU:
        return True
    if isinstance(a, tuple) or isinstance(b, tuple):
        if not (isinstance(a, tuple) and isinstance(b, tuple)):
            raise TypeMismatch("comparison mixes scalar and vector")
        if op != "=":
            raise TypeMismatch("ordered comparison on vectors")
        return a == b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    if op == "=":
        return a == b
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    raise ValueError("unknown comparator %r" % op)


# ---------------------------------------------------------------------------
# Variable tables and valuations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarTable:
    """Ordered table of independent Boolean random variables with P(true)."""

    vars: tuple  # tuple of (name, p_true)
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        seen = {}
        for i, (name, p) in enumerate(self.vars):
            if name in seen:
                raise ValueError("duplicate variable id %r" % name)
            if not (0.0 <= p <= 1.0):
                raise ValueError("probability of %r out of range: %r" % (name, p))
            seen[name] = i
        object.__setattr__(self, "index", seen)

    @classmethod
    def of(cls, *pairs):
        return cls(tuple(pairs))

    def names(self):
        return [name for name, _ in self.vars]

    def p_true(self, name):
        return self.vars[self.index[name]][1]

    def __len__(self):
        return len(self.vars)

    def __contains__(self, name):
        return name in self.index


def world_probability(valuation, vartable):
    """Probability of a total valuation: product of per-variable factors."""
    p = 1.0
    for name, p_true in vartable.vars:
        if name not in valuation:
            raise ResolutionError("valuation misses variable %r" % name)
        p *= p_true if valuation[name] else 1.0 - p_true
    return p


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------
#
# Event expressions (Boolean):
#   Const, Var, Ref, Atom, Not, And, Or
# Conditional values:
#   CondVal (guarded constant), Guard (guarded c-value), Add, Mul, Inv,
#   Pow, Dist
#
# Ref nodes name either another event declaration (by grounded identifier)
# or, before grounding, a parametrised identifier; see eventprog.py.


@dataclass(frozen=True)
class Const:
    value: bool

    def __repr__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Ref:
    name: str
    indices: tuple = ()


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Atom:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class CondVal:
    """Guarded constant: the value when the guard holds, undefined otherwise."""

    guard: object
    value: object  # scalar, vector tuple, or an index expression pre-grounding


@dataclass(frozen=True)
class Guard:
    """Guarded c-value: the body's value when the guard holds, else undefined."""

    guard: object
    body: object


@dataclass(frozen=True)
class Add:
    children: tuple


@dataclass(frozen=True)
class Mul:
    children: tuple


@dataclass(frozen=True)
class Inv:
    child: object


@dataclass(frozen=True)
class Pow:
    child: object
    exponent: int


@dataclass(frozen=True)
class Dist:
    left: object
    right: object


EVENT_KINDS = (Const, Var, Ref, Not, And, Or, Atom)
CVAL_KINDS = (CondVal, Guard, Add, Mul, Inv, Pow, Dist)


def is_event_expr(e):
    return isinstance(e, EVENT_KINDS)


def is_cval_expr(e):
    return isinstance(e, CVAL_KINDS)


# ---------------------------------------------------------------------------
# Per-world evaluation
# ---------------------------------------------------------------------------


class _Evaluator:
    """Evaluates expressions under one total valuation.

    ``env`` maps grounded identifiers to their defining expressions; each
    identifier is evaluated at most once per world and cycles are detected.
    """

    __slots__ = ("valuation", "env", "cache", "in_progress")

    def __init__(self, valuation, env):
        self.valuation = valuation
        self.env = env or {}
        self.cache = {}
        self.in_progress = set()

    def resolve(self, name):
        if name in self.cache:
            return self.cache[name]
        if name not in self.env:
            raise ResolutionError("unresolved identifier %r" % name)
        if name in self.in_progress:
            raise CycleError("identifier cycle through %r" % name)
        self.in_progress.add(name)
        value = self.eval(self.env[name])
        self.in_progress.discard(name)
        self.cache[name] = value
        return value

    def eval(self, e):
        kind = type(e)
        if kind is Const:
            return e.value
        if kind is Var:
            if e.name not in self.valuation:
                raise ResolutionError("unresolved variable %r" % e.name)
            return self.valuation[e.name]
        if kind is Ref:
            return self.resolve(e.name)
        if kind is Not:
            return not self.eval(e.child)
        if kind is And:
            return all(self.eval(c) for c in e.children)
        if kind is Or:
            return any(self.eval(c) for c in e.children)
        if kind is Atom:
            return ext_compare(e.op, self.eval(e.left), self.eval(e.right))
        if kind is CondVal:
            if self.eval(e.guard):
                return e.value
            return undef_like(e.value)
        if kind is Guard:
            body = self.eval(e.body)
            if self.eval(e.guard):
                return body
            return undef_like(body)
        if kind is Add:
            acc = U
            for c in e.children:
                acc = ext_add(acc, self.eval(c))
            return acc
        if kind is Mul:
            if not e.children:
                return U
            acc = self.eval(e.children[0])
            for c in e.children[1:]:
                acc = ext_mul(acc, self.eval(c))
            return acc
        if kind is Inv:
            return ext_inv(self.eval(e.child))
        if kind is Pow:
            return ext_pow(self.eval(e.child), e.exponent)
        if kind is Dist:
            return ext_dist(self.eval(e.left), self.eval(e.right))
        raise TypeError("not an expression: %r" % (e,))


def eval_event(e, valuation, env=None):
    """Truth value of an event expression in the world ``valuation``."""
    result = _Evaluator(valuation, env).eval(e)
    if not isinstance(result, bool):
        raise TypeMismatch("expression is not an event: %r" % (e,))
    return result


def eval_cval(c, valuation, env=None):
    """Extended value of a c-value expression in the world ``valuation``."""
    result = _Evaluator(valuation, env).eval(c)
    if isinstance(result, bool):
        raise TypeMismatch("expression is not a c-value: %r" % (c,))
    return result


def eval_expr(e, valuation, env=None):
    """Evaluate either an event or a c-value."""
    return _Evaluator(valuation, env).eval(e)


# ---------------------------------------------------------------------------
# Static kind inference ('b' boolean, 's' scalar, 'v' vector)
# ---------------------------------------------------------------------------


def infer_kind(e, env_kinds=None):
    """Infer the static kind of an expression; raises TypeMismatch when ill-typed.

    ``env_kinds`` maps grounded identifiers to their kinds.
    """
    env_kinds = env_kinds or {}
    if isinstance(e, (Const, Var, Not, And, Or, Atom)):
        for c in _event_children(e):
            k = infer_kind(c, env_kinds)
            if isinstance(e, (Not, And, Or)) and k != "b":
                raise TypeMismatch("boolean connective over non-event")
        if isinstance(e, Atom):
            lk = infer_kind(e.left, env_kinds)
            rk = infer_kind(e.right, env_kinds)
            if "b" in (lk, rk):
                raise TypeMismatch("atom compares events")
            if lk != rk:
                raise TypeMismatch("atom compares scalar with vector")
            if lk == "v" and e.op != "=":
                raise TypeMismatch("ordered comparison on vectors")
        return "b"
    if isinstance(e, Ref):
        if e.name in env_kinds:
            return env_kinds[e.name]
        return "b"  # bare references default to events; grounding re-checks
    if isinstance(e, CondVal):
        if infer_kind(e.guard, env_kinds) != "b":
            raise TypeMismatch("guard is not an event")
        return "v" if isinstance(e.value, tuple) else "s"
    if isinstance(e, Guard):
        if infer_kind(e.guard, env_kinds) != "b":
            raise TypeMismatch("guard is not an event")
        return infer_kind(e.body, env_kinds)
    if isinstance(e, Add):
        kinds = {infer_kind(c, env_kinds) for c in e.children}
        if "b" in kinds or len(kinds) > 1:
            raise TypeMismatch("sum over mixed kinds")
        return kinds.pop() if kinds else "s"
    if isinstance(e, Mul):
        k = "s"
        for c in e.children:
            ck = infer_kind(c, env_kinds)
            if ck == "b":
                raise TypeMismatch("product over events")
            if k == "v" and ck == "v":
                k = "s"  # dot product
            elif "v" in (k, ck):
                k = "v"
        return k
    if isinstance(e, Inv):
        if infer_kind(e.child, env_kinds) != "s":
            raise TypeMismatch("inverse requires a scalar")
        return "s"
    if isinstance(e, Pow):
        if infer_kind(e.child, env_kinds) != "s":
            raise TypeMismatch("power requires a scalar")
        return "s"
    if isinstance(e, Dist):
        if infer_kind(e.left, env_kinds) != "v" or infer_kind(e.right, env_kinds) != "v":
            raise TypeMismatch("dist requires vector operands")
        return "s"
    raise TypeError("not an expression: %r" % (e,))


def _event_children(e):
    if isinstance(e, Not):
        return (e.child,)
    if isinstance(e, (And, Or)):
        return e.children
    return ()


def children_of(e):
    """All direct subexpressions of an expression node."""
    kind = type(e)
    if kind in (Const, Var, Ref):
        return ()
    if kind is Not:
        return (e.child,)
    if kind in (And, Or, Add, Mul):
        return e.children
    if kind is Atom:
        return (e.left, e.right)
    if kind is CondVal:
        return (e.guard,)
    if kind is Guard:
        return (e.guard, e.body)
    if kind in (Inv, Pow):
        return (e.child,)
    if kind is Dist:
        return (e.left, e.right)
    raise TypeError("not an expression: %r" % (e,))
