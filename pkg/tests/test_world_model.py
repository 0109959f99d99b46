
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samalm.sim.geometry import Vec2
from samalm.sim.state import PERSONAS, EntityView, LocalObservation, RobotKind, RobotState
from samalm.world_model import (
    NodeKind,
    Trend,
    build_graph,
    classify_trend,
    parse_world_text,
    textualize,
)

MOBILE = PERSONAS[RobotKind.MOBILE_ROBOT]
ZERO = Vec2(0.0, 0.0)


def obs(humans=(), robots=(), p=ZERO, v=ZERO, g=Vec2(4.0, 0.0), t=0.0):
    me = RobotState(0, MOBILE, p, v, g, 0.0)
    return LocalObservation(0, me, tuple(humans), tuple(robots), t)


def ev(i, p, v=(0.0, 0.0)):
    return EntityView(i, Vec2(*p), Vec2(*v))


def test_structural_counts():
    g = build_graph(obs([ev(0, (1, 1)), ev(1, (2, 2))], [ev(1, (-1, 0))]))
    assert len(g.nodes) == 4 and len(g.spatial_edges) == 3 and len(g.temporal_edges) == 4
    assert [n.kind for n in g.nodes].count(NodeKind.SELF) == 1
    assert all(n.g is None for n in g.nodes[1:])


def test_approaching_human_and_canonical_line():
    g = build_graph(obs([ev(0, (2, 0), (-1, 0))]))
    edge = g.spatial_edges[0]
    assert edge.trend is Trend.APPROACHING
    assert edge.closing_speed == pytest.approx(1.0)
    text = textualize(g, MOBILE).text
    assert "human-0: pos=(2.00,0.00) vel=(-1.00,0.00) dist=2.00 trend=approaching accel=0.00 next=(1.75,0.00)" in text.splitlines()


def test_empty_surroundings_only_self_block():
    text = textualize(build_graph(obs()), MOBILE).text
    assert text == (
        "self: pos=(0.00,0.00) vel=(0.00,0.00) goal=(4.00,0.00) goal_dist=4.00 "
        "pref_speed=1.25 social_dist=0.45"
    )


def test_first_step_accel_zero_and_history_accel():
    now = obs([ev(0, (2, 0), (-1, 0))])
    assert all(e.accel == 0.0 for e in build_graph(now).temporal_edges[1:])
    before = obs([ev(0, (2.25, 0), (-0.5, 0))])
    g = build_graph(now, before, dt=0.25)
    assert g.temporal_edges[1].accel == pytest.approx((1.0 - 0.5) / 0.25)
    # An entity unseen before also gets zero.
    g = build_graph(obs([ev(3, (2, 0), (-1, 0))]), before)
    assert g.temporal_edges[1].accel == 0.0


def test_ordering_robots_then_humans_by_id():
    text = textualize(
        build_graph(obs([ev(5, (1, 2)), ev(2, (3, 3))], [ev(4, (0, 3)), ev(1, (-2, 0))])), MOBILE
    ).text
    keys = [line.split(":")[0] for line in text.splitlines()]
    assert keys == ["self", "robot-1", "robot-4", "human-2", "human-5"]


def test_canonical_and_pure():
    o = obs([ev(0, (1.234, -0.5), (0.3, 0.1))], [ev(2, (3, 3))])
    a = textualize(build_graph(o), MOBILE)
    b = textualize(build_graph(o), MOBILE)
    assert a.text.encode() == b.text.encode()
    assert a.line_index == {"self": 0, "robot-2": 1, "human-0": 2}


def test_negative_zero_is_normalized():
    text = textualize(build_graph(obs([ev(0, (-0.001, 2.0))])), MOBILE).text
    assert "-0.00" not in text


coord = st.integers(-800, 800).map(lambda k: k / 100)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(coord, coord, coord, coord), min_size=0, max_size=6), coord, coord)
def test_round_trip_parse_recovers_quantized_graph(ents, gx, gy):
    views = [ev(i, (px, py), (vx, vy)) for i, (px, py, vx, vy) in enumerate(ents)]
    g = build_graph(obs(views, g=Vec2(gx, gy)))
    parsed = parse_world_text(textualize(g, MOBILE).text)
    assert parsed.g == Vec2(gx, gy)
    assert len(parsed.entities) == len(views)
    for e, v in zip(parsed.entities, views):
        assert (e.id, e.p, e.v) == (v.id, v.p, v.v)
        assert e.p_next.x == pytest.approx(v.p.x + v.v.x * 0.25, abs=0.0051)


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord)
def test_trend_antisymmetric_under_velocity_reversal(px, py, vx, vy):
    if (px, py) == (0.0, 0.0):
        return
    fwd = build_graph(obs([ev(0, (px, py), (vx, vy))])).spatial_edges[0]
    rev = build_graph(obs([ev(0, (px, py), (-vx, -vy))])).spatial_edges[0]
    flip = {Trend.APPROACHING: Trend.RECEDING, Trend.RECEDING: Trend.APPROACHING, Trend.STATIC: Trend.STATIC}
    assert rev.trend is flip[fwd.trend]
    assert rev.closing_speed == pytest.approx(-fwd.closing_speed)


def test_p_next_exact_for_constant_velocity():
    p, v = Vec2(1.5, -2.0), Vec2(0.4, 0.8)
    g = build_graph(obs([EntityView(0, p, v)]))
    assert g.temporal_edges[1].p_next == p + v * 0.25


def test_trend_dead_band():
    assert classify_trend(-0.05) is Trend.STATIC
    assert classify_trend(0.051) is Trend.RECEDING
    assert classify_trend(-0.2) is Trend.APPROACHING


def test_parser_rejects_missing_self_and_ignores_noise():
    with pytest.raises(ValueError):
        parse_world_text("human-0: nothing")
    text = textualize(build_graph(obs([ev(0, (2, 0))])), MOBILE).text
    parsed = parse_world_text("Header\n" + text + "\nTrailer")
    assert parsed.pref_speed == 1.25 and parsed.social_dist == 0.45
