import math

import pytest
from hypothesis import given, strategies as st

from manyworlds.events import (
    U, VU, Add, And, Atom, CondVal, Const, Dist, Guard, Inv, Mul, Not, Or,
    Pow, Ref, TypeMismatch, Var, VarTable, TRUE, FALSE, eval_cval, eval_event,
    eval_expr, ext_add, ext_compare, ext_dist, ext_inv, ext_mul, ext_pow,
    world_probability,
)


# --- undefined algebra -------------------------------------------------------

def test_undefined_identities():
    assert ext_add(U, 3.0) == 3.0
    assert ext_add(3.0, U) == 3.0
    assert ext_mul(U, 3.0) is U
    assert ext_mul(3.0, U) is U
    assert ext_inv(0) is U
    assert ext_inv(0.0) is U
    assert ext_mul(U, (1.0, 2.0)) is VU
    assert ext_add(VU, (1.0, 2.0)) == (1.0, 2.0)
    assert ext_mul(2.0, VU) is VU
    assert ext_mul(VU, (1.0, 2.0)) is U  # vector-vector products are scalars


def test_five_times_inverse_of_zero_is_undefined():
    c = Mul((CondVal(TRUE, 5), Inv(Add((CondVal(TRUE, 3), CondVal(TRUE, -3))))))
    assert eval_cval(c, {}) is U


scalars = st.one_of(st.just(U), st.floats(-50, 50, allow_nan=False))


@given(scalars, st.floats(-50, 50, allow_nan=False))
def test_add_neutral_mul_absorbing(a, x):
    assert ext_add(U, x) == x
    assert ext_mul(U, x) is U
    assert ext_add(a, U) == (a if a is not U else U)


@given(st.floats(-20, 20, allow_nan=False), st.floats(-20, 20, allow_nan=False))
def test_vector_rules(a, b):
    v = (a, b)
    assert ext_mul(U, v) is VU
    assert ext_add(VU, v) == v
    assert ext_mul(a, VU) is VU
    assert ext_mul(VU, v) is U


def test_type_errors():
    with pytest.raises(TypeMismatch):
        ext_inv((1.0, 2.0))
    with pytest.raises(TypeMismatch):
        ext_dist(1.0, 2.0)
    with pytest.raises(TypeMismatch):
        ext_add(1.0, (1.0, 2.0))
    with pytest.raises(TypeMismatch):
        ext_compare("<", (1.0,), (2.0,))


def test_pow_edge_cases():
    assert ext_pow(0.0, -1) is U
    assert ext_pow(2.0, -2) == 0.25
    assert ext_pow(5.0, 0) == 1
    assert ext_pow(U, 3) is U


def test_dist_euclidean():
    assert ext_dist((0.0, 0.0), (3.0, 4.0)) == 5.0
    assert ext_dist(U, (1.0,)) is U
    assert ext_dist((1.0,), VU) is U


# --- event evaluation -------------------------------------------------------

EX_NU = {"x1": True, "x2": False, "x3": True, "x4": True}


def test_line_world_events():
    phi0 = Or((Var("x1"), Var("x3")))
    phi1 = Var("x2")
    phi2 = Var("x3")
    phi3 = And((Not(Var("x2")), Var("x4")))
    assert eval_event(phi0, EX_NU) is True
    assert eval_event(phi1, EX_NU) is False
    assert eval_event(phi2, EX_NU) is True
    assert eval_event(phi3, EX_NU) is True


def test_constants_and_undefined_atom():
    assert eval_event(TRUE, {"x": False}) is True
    # right operand undefined: the comparison holds vacuously
    atom = Atom("<=", CondVal(Var("x"), 2.0), CondVal(FALSE, 5.0))
    assert eval_event(atom, {"x": True}) is True
    assert eval_event(atom, {"x": False}) is True


def test_guarded_sum_cases():
    c = Add((CondVal(Var("a"), 2.0), CondVal(Var("b"), 3.0)))
    assert eval_cval(c, {"a": True, "b": True}) == 5.0
    assert eval_cval(c, {"a": True, "b": False}) == 2.0
    assert eval_cval(c, {"a": False, "b": False}) is U


def test_or_tag_vs_sum_of_tags_differ():
    both = {"a": True, "b": True}
    left = CondVal(Or((Var("a"), Var("b"))), 4.0)
    right = Add((CondVal(Var("a"), 4.0), CondVal(Var("b"), 4.0)))
    assert eval_cval(left, both) == 4.0
    assert eval_cval(right, both) == 8.0


def test_ref_resolution_and_cycles():
    env = {"A": Var("x"), "B": Ref("A")}
    assert eval_event(Ref("B"), {"x": True}, env) is True
    from manyworlds.events import CycleError, ResolutionError
    with pytest.raises(ResolutionError):
        eval_event(Ref("missing"), {"x": True}, env)
    loop_env = {"A": Ref("B"), "B": Ref("A")}
    with pytest.raises(CycleError):
        eval_event(Ref("A"), {}, loop_env)


def test_guard_of_vector_body():
    body = CondVal(Var("a"), (1.0, 2.0))
    g = Guard(Var("b"), body)
    assert eval_cval(g, {"a": True, "b": True}) == (1.0, 2.0)
    assert eval_cval(g, {"a": True, "b": False}) is VU
    assert eval_cval(g, {"a": False, "b": True}) is VU


# --- world probabilities ------------------------------------------------------

def test_world_probability_uniform():
    vt = VarTable.of(("a", 0.5), ("b", 0.5))
    for nu in ({"a": True, "b": True}, {"a": False, "b": True}):
        assert abs(world_probability(nu, vt) - 0.25) < 1e-12


def test_world_probability_single():
    vt = VarTable.of(("x", 0.7),)
    assert abs(world_probability({"x": True}, vt) - 0.7) < 1e-12
    assert abs(world_probability({"x": False}, vt) - 0.3) < 1e-12


def test_world_probability_product():
    vt = VarTable.of(("x1", 0.6), ("x2", 0.5), ("x3", 0.7), ("x4", 0.4))
    expect = 0.6 * 0.5 * 0.7 * 0.4
    assert abs(world_probability(dict(EX_NU), vt) - expect) < 1e-12


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=8))
def test_mass_function_sums_to_one(ps):
    vt = VarTable(tuple(("v%d" % i, p) for i, p in enumerate(ps)))
    total = 0.0
    m = len(ps)
    for w in range(1 << m):
        nu = {"v%d" % i: bool((w >> i) & 1) for i in range(m)}
        total += world_probability(nu, vt)
    assert abs(total - 1.0) < 1e-9


def test_vartable_validation():
    with pytest.raises(ValueError):
        VarTable.of(("a", 0.5), ("a", 0.6))
    with pytest.raises(ValueError):
        VarTable.of(("a", 1.5),)


# --- totality under fuzzing ----------------------------------------------------

def _rand_event(rng, depth, names):
    r = rng.random()
    if depth == 0 or r < 0.3:
        return Var(rng.choice(names))
    if r < 0.5:
        return Not(_rand_event(rng, depth - 1, names))
    if r < 0.75:
        kids = tuple(_rand_event(rng, depth - 1, names) for _ in range(2))
        return And(kids) if rng.random() < 0.5 else Or(kids)
    return Atom(rng.choice(("<=", "<", ">=", ">", "=")),
                _rand_cval(rng, depth - 1, names),
                _rand_cval(rng, depth - 1, names))


def _rand_cval(rng, depth, names):
    r = rng.random()
    if depth == 0 or r < 0.4:
        return CondVal(_rand_event(rng, 0, names), rng.choice((0.0, 1.0, 2.5)))
    if r < 0.6:
        return Add(tuple(_rand_cval(rng, depth - 1, names) for _ in range(2)))
    if r < 0.75:
        return Mul(tuple(_rand_cval(rng, depth - 1, names) for _ in range(2)))
    if r < 0.9:
        return Inv(_rand_cval(rng, depth - 1, names))
    return Pow(_rand_cval(rng, depth - 1, names), rng.choice((-1, 0, 2, 3)))


@given(st.integers(0, 500), st.integers(0, 15))
def test_well_typed_evaluation_is_total(seed, world):
    import random
    rng = random.Random(seed)
    names = ["a", "b", "c", "d"]
    nu = {n: bool((world >> i) & 1) for i, n in enumerate(names)}
    e = _rand_event(rng, 3, names)
    assert eval_event(e, nu) in (True, False)
    c = _rand_cval(rng, 3, names)
    v = eval_cval(c, nu)
    assert v is U or isinstance(v, float) or isinstance(v, int)
