import pytest

from csnkit.metrics import compute_metrics, infraction_score
from csnkit.sim import EpisodeTrace, Termination


def trace(rc=1.0, infractions=(), name="r"):
    return EpisodeTrace(name, [], list(infractions), rc, Termination.COMPLETED)


@pytest.mark.parametrize(
    "rc, infractions, ds, is_",
    [
        (1.0, [], 100.0, 1.0),
        (1.0, [("collision_vehicle", 10)], 60.0, 0.60),
        (0.5, [("red_light", 3), ("red_light", 90)], 24.5, 0.49),
        (0.8, [("blocked", 400)], 80.0, 1.0),
    ],
)
def test_single_route(rc, infractions, ds, is_):
    m = compute_metrics([trace(rc, infractions)])
    assert m.ds == pytest.approx(ds)
    assert m.is_ == pytest.approx(is_)
    assert m.rc == pytest.approx(100 * rc)


def test_reps_averaged_before_routes():
    traces = [trace(1.0, name="a"), trace(0.0, name="a"), trace(1.0, name="a"), trace(1.0, name="b")]
    m = compute_metrics(traces)
    assert m.per_route["a"].n == 3
    assert m.per_route["a"].ds == pytest.approx(200 / 3)
    assert m.ds == pytest.approx((200 / 3 + 100) / 2)


def test_trace_properties_agree():
    tr = trace(0.5, [("collision_pedestrian", 1), ("collision_static", 2)])
    assert tr.infraction_score == pytest.approx(infraction_score(tr.infractions)) == pytest.approx(0.325)
    assert tr.driving_score == pytest.approx(50 * 0.325)


def test_empty_rejected():
    with pytest.raises(ValueError):
        compute_metrics([])
