import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtwist.chart import (ProductSpec, assemble_metric, block_split, load_spec, make_spec,
                          sample_grid, validate_spec)
from mtwist.errors import DimensionError, NonDegenerateViolation, SpecError, UnboundVariableError
from mtwist.library import random_spec


def simple(warp="1"):
    return make_spec([["-1"]], ["t"], [("F", 1, ["x"], [["1"]])], [warp])


def test_constant_warp_metric():
    np.testing.assert_array_equal(assemble_metric(simple(), [0.3, 0.1]), np.diag([-1.0, 1.0]))


def test_exponential_warp_metric_at_log2():
    np.testing.assert_allclose(assemble_metric(simple("exp(t)"), [math.log(2), 0.0]), np.diag([-1.0, 4.0]))


def two_fiber():
    return make_spec([["-1", "0"], ["0", "1 + s^2"]], ["t", "s"],
                     [("F1", 1, ["x"], [["1"]]), ("F2", 2, ["y", "z"], [["1", "0.1*y"], ["0.1*y", "2"]])],
                     ["exp(0.5*t + 0.2*x*s)", "2 + t"], domain_box=[[0, 1], [-1, 1], [-1, 1], [-1, 1], [-1, 1]])


def test_metric_equals_entrywise_rebuild():
    spec = two_fiber()
    t, s, x, y, z = np.random.default_rng(3).uniform(-0.5, 0.5, 5)
    g = assemble_metric(spec, [t, s, x, y, z])
    b1 = math.exp(0.5 * t + 0.2 * x * s)
    b2 = 2 + t
    want = np.zeros((5, 5))
    want[0, 0], want[1, 1] = -1, 1 + s * s
    want[2, 2] = b1 * b1
    want[3:, 3:] = b2 * b2 * np.array([[1, 0.1 * y], [0.1 * y, 2]])
    np.testing.assert_allclose(g, want, rtol=1e-15)


def test_metric_is_block_diagonal_exactly():
    g = assemble_metric(two_fiber(), [0.2, 0.1, 0.3, -0.2, 0.4])
    assert np.all(g[:2, 2:] == 0) and np.all(g[2, 3:] == 0)
    assert np.array_equal(g, g.T)


def test_classification():
    assert validate_spec(simple("exp(t)")).classification == ["warped"]
    assert validate_spec(simple("exp(t + x^2)")).classification == ["twisted"]


def test_positivity_violation_reported_with_sample():
    spec = make_spec([["-1"]], ["t"], [("F", 1, ["x"], [["1"]])], ["t"], domain_box=[[-1, 1], [0, 1]])
    rep = validate_spec(spec)
    assert not rep.ok
    f = [f for f in rep.findings if f.kind == "positivity"][0]
    assert f.point[0] <= 0


def test_signature_violation_reported():
    spec = make_spec([["1"]], ["t"], [("F", 1, ["x"], [["1"]])], ["1"], signature=[-1])
    assert any(f.kind == "signature" for f in validate_spec(spec).findings)


def test_degenerate_block_raises_on_assembly():
    spec = make_spec([["-1"]], ["t"], [("F", 2, ["x", "y"], [["1", "1"], ["1", "1"]])], ["1"])
    with pytest.raises(NonDegenerateViolation) as err:
        assemble_metric(spec, [0, 0, 0])
    assert err.value.block == "F1"


def test_scope_rules():
    with pytest.raises(UnboundVariableError):
        make_spec([["-1"]], ["t"], [("F", 1, ["x"], [["1 + t"]])], ["1"])
    with pytest.raises(UnboundVariableError):
        make_spec([["-1"]], ["t"], [("F", 1, ["x"], [["1"]]), ("G", 1, ["y"], [["1"]])], ["1", "1 + x^2"])


def test_block_split_small():
    spec = simple()
    bv = block_split(spec, [2.0, 5.0])
    assert bv.base.tolist() == [2.0] and bv.fibers[0].tolist() == [5.0]


def test_block_split_zero_and_wrong_length():
    bv = block_split(two_fiber(), np.zeros(5))
    assert all(not np.any(b) for b in [bv.base, *bv.fibers])
    with pytest.raises(DimensionError):
        block_split(two_fiber(), np.zeros(4))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=5, max_size=5))
def test_block_split_round_trip(v):
    v = np.array(v)
    assert np.array_equal(block_split(two_fiber(), v).assemble(), v)


def test_block_offsets_are_contiguous():
    sl = two_fiber().block_slices()
    assert [(s.start, s.stop) for s in sl] == [(0, 2), (2, 3), (3, 5)]


def test_warped_scaling_does_not_see_fiber_coordinates():
    spec = make_spec([["-1"]], ["t"], [("F", 2, ["x", "y"], [["1", "0"], ["0", "1 + x^2"]])], ["exp(t)"])
    a = assemble_metric(spec, [0.3, 0.0, 0.0])[1, 1]
    b = assemble_metric(spec, [0.3, 0.0, 0.7])[1, 1]
    assert a == b


def test_determinant_sign_matches_signature():
    spec = two_fiber()
    for p in sample_grid(spec.domain_box, 3):
        assert np.sign(np.linalg.det(assemble_metric(spec, p))) == -1


def test_json_round_trip(tmp_path):
    spec = random_spec(4, torsion="fiber")
    path = tmp_path / "s.json"
    path.write_text(json.dumps(spec.to_dict()))
    again = load_spec(path)
    assert again.to_dict() == spec.to_dict()
    p = spec.box_center()
    np.testing.assert_array_equal(assemble_metric(again, p), assemble_metric(spec, p))


def test_malformed_document():
    with pytest.raises(SpecError):
        ProductSpec.from_dict({"fibers": []})
