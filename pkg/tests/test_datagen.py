import pytest

from manyworlds.datagen import Dataset, DatasetError, gen_correlations
from manyworlds.events import Const, eval_event
from manyworlds.eventprog import EventProgram, decl, ground
from manyworlds.oracle import oracle_probabilities


def _event_program(ds):
    idx = {p.id: i for i, p in enumerate(ds.points)}
    from manyworlds.kmedoids import _points_to_refs
    items = [decl("Obj", (i,), _points_to_refs(p.event, idx))
             for i, p in enumerate(ds.points)]
    return EventProgram(tuple(items))


def _existence_probs(ds, pairs=()):
    from manyworlds.events import And, Ref
    items = list(_event_program(ds).items)
    for (a, b) in pairs:
        items.append(decl("Both", (a, b),
                          And((Ref("Obj[%d]" % a), Ref("Obj[%d]" % b)))))
    g = ground(EventProgram(tuple(items)), ("*",),
               variables=set(ds.vartable.index))
    return oracle_probabilities(g, ds.vartable, list(g.decls))


def test_mutex_pairwise_exclusion():
    ds = gen_correlations(8, "mutex", group=2, m=3, seed=5, iterations=1)
    # groups of two points; the first three groups form one mutex set
    res = _existence_probs(ds, pairs=[(0, 2), (0, 4), (2, 4)])
    assert res.probabilities["Both[0,2]"] == 0.0
    assert res.probabilities["Both[0,4]"] == 0.0
    assert res.probabilities["Both[2,4]"] == 0.0


def test_mutex_independence_across_sets():
    ds = gen_correlations(8, "mutex", group=2, m=2, seed=5, iterations=1)
    # sets: groups {0,1}, {2,3} -> points 0/1 vs 4/5 are in different sets
    res = _existence_probs(ds, pairs=[(0, 4)])
    pa = res.probabilities["Obj[0]"]
    pb = res.probabilities["Obj[4]"]
    assert abs(res.probabilities["Both[0,4]"] - pa * pb) < 1e-9


def test_certain_fraction_one_single_world():
    ds = gen_correlations(6, "positive", group=3, certain=1.0, seed=2)
    assert len(ds.vartable) == 0
    assert all(p.event is not None and isinstance(p.event, Const)
               for p in ds.points)


def test_certain_points_exist_everywhere():
    ds = gen_correlations(8, "positive", group=4, certain=0.5, seed=9)
    g = ground(_event_program(ds), ("*",), variables=set(ds.vartable.index))
    from manyworlds.oracle import world_reports
    for rep in world_reports(g, ds.vartable):
        for i in range(4):
            assert rep.values["Obj[%d]" % i] is True


def test_markov_conditional_matches_step_probability():
    ds = gen_correlations(3, "markov", group=1, seed=11, iterations=1)
    res = _existence_probs(ds, pairs=[(0, 1)])
    p01 = res.probabilities["Both[0,1]"]
    p0 = res.probabilities["Obj[0]"]
    xt = dict(ds.vartable.vars)["x1_t"]
    assert abs(p01 / p0 - xt) < 1e-9  # P(next | prev) equals the step variable


def test_group_lineage_shared_object():
    ds = gen_correlations(12, "positive", group=4, seed=3)
    for start in (0, 4, 8):
        events = {id(ds.points[start + j].event) for j in range(4)}
        assert len(events) == 1


def test_determinism_under_seed():
    a = gen_correlations(10, "mutex", group=2, m=3, seed=77)
    b = gen_correlations(10, "mutex", group=2, m=3, seed=77)
    assert a.to_json() == b.to_json()
    c = gen_correlations(10, "mutex", group=2, m=3, seed=78)
    assert a.to_json() != c.to_json()


def test_probability_range_respected():
    ds = gen_correlations(16, "positive", group=4, seed=1, prob_range=(0.5, 0.8))
    for _n, p in ds.vartable.vars:
        assert 0.5 <= p <= 0.8


def test_positive_pool_default():
    ds = gen_correlations(20, "positive", group=4, seed=4)
    assert len(ds.vartable) == 5  # one pool variable per group by default
    ds2 = gen_correlations(20, "positive", group=4, pool=12, seed=4)
    assert len(ds2.vartable) == 12


def test_json_round_trip(tmp_path):
    ds = gen_correlations(10, "markov", group=2, seed=13, certain=0.2)
    path = tmp_path / "ds.json"
    ds.save(path)
    ds2 = Dataset.load(path)
    assert ds2.to_json() == ds.to_json()
    # events still evaluate identically
    env1, env2 = ds.event_env(), ds2.event_env()
    names = ds.vartable.names()
    for w in range(1 << len(names)):
        nu = {n: bool((w >> j) & 1) for j, n in enumerate(names)}
        for p1, p2 in zip(ds.points, ds2.points):
            assert eval_event(p1.event, nu, env1) == eval_event(p2.event, nu, env2)


def test_validation_errors():
    with pytest.raises(DatasetError):
        gen_correlations(0, "positive")
    with pytest.raises(DatasetError):
        gen_correlations(4, "positive", certain=1.5)
    with pytest.raises(DatasetError):
        gen_correlations(4, "positive", prob_range=(0.0, 0.5))
    with pytest.raises(DatasetError):
        gen_correlations(4, "nope")
