import pytest

from mtwist.discrepancy import known_discrepancies, structured_vs_oracle
from mtwist.library import random_points, random_spec


def test_every_catalogued_discrepancy_reproduces():
    items = known_discrepancies()
    assert len(items) == 6
    for d in items:
        assert d.confirmed, d.name
        assert d.printed_residual > d.tolerance >= d.corrected_residual
        assert not any(ch.isdigit() for ch in d.name)


def test_topic_filter():
    assert [d.name for d in known_discrepancies(["geodesic"])] == ["static geodesic time equation sign"]
    with pytest.raises(ValueError):
        known_discrepancies(["optics"])


def test_sweep_report_shape():
    spec = random_spec(1)
    rep = structured_vs_oracle(spec, random_points(spec, 3, 1))
    assert rep["ok"] and rep["discrepancies"] == []
    assert len(rep["points"]) == 3 and set(rep["max"]) == {"curvature", "ricci", "scalar"}


def test_sweep_flags_injected_error():
    spec = random_spec(2)
    rep = structured_vs_oracle(spec, random_points(spec, 2, 0), tol=-1.0)
    assert not rep["ok"] and set(rep["discrepancies"]) == {"curvature", "ricci", "scalar"}
