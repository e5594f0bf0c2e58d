import pytest

from manyworlds.userlang import (
    UAssign, UExtCall, UFor, UserSyntaxError, format_user_program,
    parse_user_program, validate_user_program,
)


def test_single_declaration():
    p = parse_user_program("M = 7")
    assert len(p.items) == 1
    assert isinstance(p.items[0], UAssign)


def test_clustering_program_shape(kmedoids_src):
    p = parse_user_program(kmedoids_src)
    loops = [i for i in p.items if isinstance(i, UFor)]
    assert len(loops) == 1  # one outer iteration loop
    exts = [i for i in p.items if isinstance(i, UExtCall)]
    assert [e.func for e in exts] == ["loadData", "loadParams", "init"]
    assert not validate_user_program(p)


def test_centroid_program_validates(kmeans_src):
    p = parse_user_program(kmeans_src)
    assert not validate_user_program(p)


def test_graph_flow_program_validates(graphflow_src):
    p = parse_user_program(graphflow_src)
    assert not validate_user_program(p)


def test_reduce_requires_comprehension():
    with pytest.raises(UserSyntaxError, match="list comprehension"):
        parse_user_program("A = reduce_and(B)")


def test_syntax_error_carries_position():
    try:
        parse_user_program("M = = 3")
    except UserSyntaxError as exc:
        assert exc.line == 1
    else:
        raise AssertionError("expected a syntax error")


def test_comments_and_blank_lines():
    p = parse_user_program("""
# leading comment

M = 7   # trailing comment

N = 8
""")
    assert len(p.items) == 2


def test_non_constant_range_bound_flagged():
    p = parse_user_program("""
(O, n) = loadData()
n2 = dist(O[0], O[1])
for i in range(0, n2):
 M = 1
""")
    diags = validate_user_program(p)
    assert any(d.rule == "range-bound" for d in diags)


def test_reassigned_name_not_a_constant_bound():
    p = parse_user_program("""
n = 3
n = 4
for i in range(0, n):
 M = 1
""")
    diags = validate_user_program(p)
    assert any(d.rule == "range-bound" for d in diags)


def test_undeclared_identifier_flagged():
    p = parse_user_program("M = Q + 1")
    diags = validate_user_program(p)
    assert any(d.rule == "undefined-id" for d in diags)


def test_two_dimensional_comprehension_flagged():
    p = parse_user_program("""
(O, n, W) = loadData()
S = reduce_sum([W[i] for i in range(0, 2)])
""")
    diags = validate_user_program(p)
    assert any(d.rule == "comprehension-dim" for d in diags)


def test_vector_elements_allowed_in_sum():
    # an array of feature vectors may be summed component-wise
    p = parse_user_program("""
(O, n) = loadData()
S = reduce_sum([O[i] for i in range(0, 2)])
""")
    assert not validate_user_program(p)


def test_ordered_vector_comparison_flagged():
    p = parse_user_program("""
(O, n) = loadData()
B = O[0] <= O[1]
""")
    diags = validate_user_program(p)
    assert any(d.rule == "compare-type" for d in diags)


def test_scalar_mult_types():
    p = parse_user_program("""
(O, n) = loadData()
V = O[0] * 2
""")
    diags = validate_user_program(p)
    assert any(d.rule == "mul-type" for d in diags)


def test_ext_calls_only_at_top_level():
    p = parse_user_program("""
for i in range(0, 2):
 M = init()
""")
    diags = validate_user_program(p)
    assert any(d.rule == "ext-top-level" for d in diags)


def test_pretty_print_fixpoint(kmedoids_src, kmeans_src, graphflow_src):
    for src in (kmedoids_src, kmeans_src, graphflow_src,
                "M = 7\nM = M + 2\nB = M <= 9\n"):
        ast1 = parse_user_program(src)
        printed = format_user_program(ast1)
        ast2 = parse_user_program(printed)
        assert ast1 == ast2
        assert format_user_program(ast2) == printed
