import pytest
from hypothesis import given, settings, strategies as st

from manyworlds.events import And, CondVal, Var, VarTable, TRUE
from manyworlds.eventprog import EventProgram, decl, ground
from manyworlds.compile import ConfigError, Search, ancestor_bits, compile_targets
from manyworlds.network import MaskState, build_network
from manyworlds.oracle import oracle_probabilities
from manyworlds.randprog import random_instance


def _net(decls, targets, variables=None):
    g = ground(EventProgram(tuple(decls)), targets, variables=variables)
    return build_network(g), g


def test_two_variable_conjunction_exact():
    net, g = _net([decl("T", (), And((Var("x0"), Var("x1"))))], ("T",))
    vt = VarTable.of(("x0", 0.5), ("x1", 0.5))
    r = compile_targets(net, vt, 0.0, "exact")
    lo, hi = r.bounds("T")
    assert abs(lo - 0.25) < 1e-12 and abs(hi - 0.25) < 1e-12
    assert r.stats.leaves == 3  # x0x1, x0!x1, !x0


def test_huge_budget_prunes_root():
    net, g = _net([decl("T", (), And((Var("x0"), Var("x1"))))], ("T",))
    vt = VarTable.of(("x0", 0.5), ("x1", 0.5))
    r = compile_targets(net, vt, 0.5, "hybrid")  # 2*eps = 1 covers everything
    lo, hi = r.bounds("T")
    assert (lo, hi) == (0.0, 1.0)
    assert r.stats.branches == 0


def test_epsilon_zero_requires_exact():
    net, g = _net([decl("T", (), Var("x0"))], ("T",))
    vt = VarTable.of(("x0", 0.5),)
    with pytest.raises(ConfigError):
        compile_targets(net, vt, 0.0, "hybrid")
    with pytest.raises(ConfigError):
        compile_targets(net, vt, 0.1, "exact")
    with pytest.raises(ConfigError):
        compile_targets(net, vt, 0.1, "bogus")


def test_next_variable_prefers_shared_influence():
    net, g = _net([
        decl("A", (), And((Var("x1"), Var("x2")))),
        decl("B", (), And((Var("x1"), Var("x3")))),
    ], ("A", "B"))
    vt = VarTable.of(("x1", 0.5), ("x2", 0.5), ("x3", 0.5))
    s = Search(net, vt, 0.0, "exact")
    assert s.next_variable() == "x1"
    s.assigned.add("x1")
    s.state.assign("x1", True, 1.0)
    # x2 and x3 now tie; the lower table index wins
    assert s.next_variable() == "x2"


def test_next_variable_single_remaining():
    net, g = _net([decl("A", (), Var("z"))], ("A",))
    vt = VarTable.of(("z", 0.3),)
    s = Search(net, vt, 0.0, "exact")
    assert s.next_variable() == "z"


def test_certain_variables_preassigned():
    net, g = _net([decl("T", (), And((Var("a"), Var("b"))))], ("T",))
    vt = VarTable.of(("a", 1.0), ("b", 0.5))
    r = compile_targets(net, vt, 0.0, "exact")
    lo, hi = r.bounds("T")
    assert abs(lo - 0.5) < 1e-12 and abs(hi - 0.5) < 1e-12
    assert r.stats.branches <= 3


def test_unknown_variable_rejected():
    net, g = _net(
        [decl("T", (), And((Var("x"), Var("ghost"))))], ("T",),
        variables={"x", "ghost"})
    vt = VarTable.of(("x", 0.5),)  # 'ghost' is not in the table
    with pytest.raises(ConfigError, match="not in the variable table"):
        compile_targets(net, vt, 0.0, "exact")


def test_undecidable_target_rejected():
    # no variable in the table influences the target and the initial masks
    # cannot settle it either
    net, g = _net(
        [decl("T", (), Var("ghost"))], ("T",), variables={"ghost"})
    vt = VarTable(())
    with pytest.raises(ConfigError):
        compile_targets(net, vt, 0.0, "exact")


@settings(deadline=None, max_examples=50)
@given(st.integers(0, 400))
def test_exactness_random_instances(seed):
    prog, vt, targets = random_instance(seed, max_vars=12)
    g = ground(prog, targets, variables=set(vt.index))
    net = build_network(g)
    r = compile_targets(net, vt, 0.0, "exact")
    ores = oracle_probabilities(g, vt, targets)
    for tb in r.targets:
        p = ores.probabilities[tb.eid]
        assert abs(tb.lower - p) < 1e-9
        assert abs(tb.upper - p) < 1e-9


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 200), st.sampled_from(["eager", "lazy", "hybrid"]),
       st.sampled_from([0.01, 0.1, 0.3]))
def test_epsilon_validity(seed, scheme, eps):
    prog, vt, targets = random_instance(seed, max_vars=10)
    g = ground(prog, targets, variables=set(vt.index))
    net = build_network(g)
    r = compile_targets(net, vt, eps, scheme)
    ores = oracle_probabilities(g, vt, targets)
    for tb in r.targets:
        p = ores.probabilities[tb.eid]
        assert tb.lower - 1e-12 <= p <= tb.upper + 1e-12
        assert tb.upper - tb.lower <= 2 * eps + 1e-12


def test_anytime_bounds_only_tighten():
    prog, vt, targets = random_instance(42, max_vars=10)
    g = ground(prog, targets, variables=set(vt.index))
    net = build_network(g)
    snapshots = []

    def on_branch(state):
        snapshots.append((list(state.problower), list(state.probupper)))

    r = compile_targets(net, vt, 0.0, "exact", on_branch=on_branch)
    final_lo = [tb.lower for tb in r.targets]
    final_hi = [tb.upper for tb in r.targets]
    prev_lo = [0.0] * len(final_lo)
    prev_hi = [1.0] * len(final_hi)
    for lo, hi in snapshots:
        for i in range(len(final_lo)):
            assert lo[i] >= prev_lo[i] - 1e-12
            assert hi[i] <= prev_hi[i] + 1e-12
            assert lo[i] <= final_lo[i] + 1e-9
            assert hi[i] >= final_hi[i] - 1e-9
        prev_lo, prev_hi = lo, hi


def test_hybrid_work_nonincreasing_in_epsilon():
    for seed in (1, 5, 9, 23):
        prog, vt, targets = random_instance(seed, max_vars=10)
        g = ground(prog, targets, variables=set(vt.index))
        net = build_network(g)
        counts = []
        for eps in (0.01, 0.1, 0.3):
            counts.append(compile_targets(net, vt, eps, "hybrid").stats.branches)
        assert counts[0] >= counts[1] >= counts[2], (seed, counts)


def test_hybrid_budget_conservation():
    for seed in (3, 8, 13):
        prog, vt, targets = random_instance(seed, max_vars=10)
        g = ground(prog, targets, variables=set(vt.index))
        net = build_network(g)
        for eps in (0.05, 0.2):
            r = compile_targets(net, vt, eps, "hybrid")
            for mass in r.pruned_mass:
                assert mass <= 2 * eps + 1e-12


def test_stats_report_format():
    net, g = _net([decl("T", (), Var("x"))], ("T",))
    vt = VarTable.of(("x", 0.5),)
    r = compile_targets(net, vt, 0.0, "exact")
    text = r.stats.report()
    assert "branches=" in text and "propagations=" in text


def test_decided_at_initialisation():
    net, g = _net([decl("T", (), TRUE)], ("T",), variables={"x"})
    vt = VarTable.of(("x", 0.5),)
    r = compile_targets(net, vt, 0.0, "exact")
    assert r.bounds("T") == (1.0, 1.0)
    assert r.stats.branches == 0
