import pytest
from hypothesis import given
from hypothesis import strategies as st

from detcal.links import (LinkSpec, apply_link, hinge, identity, parse_link,
                          ramp, threshold)


def test_identity_returns_similarity():
    assert apply_link(identity(), 0.73) == 0.73


def test_ramp_midpoint():
    assert apply_link(ramp(0.25, 0.75), 0.5) == pytest.approx(0.5, abs=1e-15)


def test_ramp_regions():
    link = ramp(0.2, 0.8)
    assert apply_link(link, 0.2) == 0.0  # boundary below stays 0
    assert apply_link(link, 0.1) == 0.0
    assert apply_link(link, 0.8) == 1.0  # saturates at beta
    assert apply_link(link, 0.95) == 1.0
    assert apply_link(link, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_threshold_step():
    link = threshold(0.5)
    assert apply_link(link, 0.6) == 1.0
    assert apply_link(link, 0.4) == 0.0
    # boundary counts as correct
    assert apply_link(link, 0.5) == 1.0


def test_hinge_is_ramp_half_to_one():
    assert hinge() == ramp(0.5, 1.0)
    assert apply_link(hinge(), 0.75) == pytest.approx(0.5, abs=1e-15)


def test_threshold_stores_alpha_equal_beta():
    link = threshold(0.3)
    assert link.alpha == link.beta == 0.3


def test_is_binary():
    assert threshold(0.5).is_binary
    assert not identity().is_binary
    assert not ramp(0.2, 0.8).is_binary


def test_construction_validation():
    with pytest.raises(ValueError):
        threshold(0.0)
    with pytest.raises(ValueError):
        threshold(1.5)
    with pytest.raises(ValueError):
        ramp(0.8, 0.2)
    with pytest.raises(ValueError):
        ramp(0.5, 0.5)
    with pytest.raises(ValueError):
        ramp(-0.1, 0.5)
    with pytest.raises(ValueError):
        LinkSpec("smoothstep")


def test_apply_link_rejects_out_of_range_similarity():
    for bad in (-0.1, 1.2, float("nan")):
        with pytest.raises(ValueError, match="similarity"):
            apply_link(identity(), bad)


def test_parse_link_forms():
    assert parse_link("identity") == identity()
    assert parse_link("hinge") == hinge()
    assert parse_link("threshold:0.3") == threshold(0.3)
    assert parse_link("ramp:0.2:0.8") == ramp(0.2, 0.8)


@pytest.mark.parametrize("text", [
    "", "step", "threshold", "threshold:0.5:0.6", "ramp:0.5",
    "threshold:zero", "ramp:0.9:0.1", "identity:1",
])
def test_parse_link_rejects(text):
    with pytest.raises(ValueError):
        parse_link(text)


@pytest.mark.parametrize("spec", [
    identity(), hinge(), threshold(0.5), threshold(0.75), ramp(0.25, 0.9),
])
def test_str_round_trips_through_parse(spec):
    assert parse_link(str(spec)) == spec


_links = st.one_of(
    st.just(identity()),
    st.just(hinge()),
    st.floats(min_value=0.01, max_value=1.0).map(threshold),
    st.tuples(st.floats(min_value=0.0, max_value=0.49),
              st.floats(min_value=0.51, max_value=1.0)).map(lambda ab: ramp(*ab)),
)
_sim = st.floats(min_value=0.0, max_value=1.0)


@given(_links, _sim, _sim)
def test_monotone_and_bounded(link, l1, l2):
    lo, hi = sorted((l1, l2))
    z_lo = apply_link(link, lo)
    z_hi = apply_link(link, hi)
    assert z_lo <= z_hi
    assert 0.0 <= z_lo <= 1.0
    assert 0.0 <= z_hi <= 1.0


@given(st.floats(min_value=0.05, max_value=0.95),
       st.floats(min_value=0.2, max_value=1.0))
def test_steep_ramp_approaches_threshold(l_value, beta):
    # away from the step location the two links agree in the limit
    if abs(l_value - beta) < 1e-3:
        return
    steep = ramp(beta - 1e-6, beta)
    assert apply_link(steep, l_value) == apply_link(threshold(beta), l_value)
