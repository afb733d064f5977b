import numpy as np
import pytest

from conftest import morphology_from_text
from ncrs import _kernel_py
from ncrs.backend import available_backends
from ncrs.morphology import ModuleKind
from ncrs.physics import PhysicsConfig, RobotBody, pack_params, step_world

# Symmetric three-wide body: wheels mirrored about the vertical axis.
TWO_WHEEL = """
.S.
WTW
"""


def _body(text=TWO_WHEEL, dims=None):
    rows = [r.strip() for r in text.strip().splitlines()]
    dims = dims or (len(rows), len(rows[0]))
    return RobotBody(morphology_from_text(text, dims=dims))


def _state(x=30.0, y=30.0, heading=0.0):
    return np.array([x, y, heading, 0, 0, 0, np.nan, np.nan, 0, 0], dtype=np.float64)


def _advance(state, body, commands, cfg=None, segments=None, has_ball=False, steps=1):
    cfg = cfg or PhysicsConfig()
    segments = np.zeros((0, 4)) if segments is None else segments
    params = pack_params(cfg, 1.0, 60.0, has_ball)
    for _ in range(steps):
        step_world(state, body, np.asarray(commands, dtype=np.float64), segments, params, cfg)
    return state


def test_body_constants():
    body = _body()
    assert body.mass == 4.0
    assert body.inertia > 0
    # Center of mass sits on the symmetry axis.
    assert abs(body.module_local[:, 0].mean()) < 1e-12
    assert len(body.wheel_cells) == 2
    assert body.kinds.count(ModuleKind.WHEEL) == 2


def test_rest_stability():
    body = _body()
    state = _state()
    before = state.copy()
    _advance(state, body, [0.0, 0.0], steps=50)
    np.testing.assert_array_equal(state[:6], before[:6])


def test_straight_line_translation():
    body = _body()
    state = _state()
    headings = []
    for _ in range(200):
        _advance(state, body, [1.0, 1.0])
        headings.append(state[2])
    assert max(abs(h) for h in headings) < 1e-9
    assert abs(state[0] - 30.0) < 1e-9  # no sideways drift
    assert state[1] > 31.0  # moved along +y


def test_forward_speed_saturates_at_v_max():
    cfg = PhysicsConfig()
    body = _body()
    state = _state(y=10.0)
    _advance(state, body, [1.0, 1.0], cfg=cfg, steps=40)
    speed = float(np.hypot(state[3], state[4]))
    assert speed <= cfg.v_max + 1e-9
    assert speed > 0.8 * cfg.v_max  # close to terminal speed by then


def test_pure_rotation():
    # Wheels on the center-of-mass line, so mirrored commands cancel
    # exactly and the body spins in place.
    body = _body("WTW", dims=(1, 3))
    state = _state()
    positions = []
    for _ in range(200):
        _advance(state, body, [-1.0, 1.0])
        positions.append((state[0], state[1]))
    drift = max(abs(x - 30.0) + abs(y - 30.0) for x, y in positions)
    assert drift < 1e-9
    assert abs(state[5]) > 0.5  # actually spinning


def test_heading_follows_turn_direction():
    body = _body()
    state = _state()
    _advance(state, body, [1.0, 0.2], steps=30)  # left wheel faster
    assert state[2] < 0  # clockwise (toward -x side): heading decreases
    state2 = _state()
    _advance(state2, body, [0.2, 1.0], steps=30)
    assert state2[2] > 0


def test_containment_random_commands():
    body = _body()
    state = _state(10.0, 10.0)
    rng = np.random.default_rng(0)
    for i in range(10_000):
        _advance(state, body, rng.uniform(-1, 1, 2))
        assert 0.0 <= state[0] <= 60.0 and 0.0 <= state[1] <= 60.0, f"escaped at {i}"
    assert np.all(np.isfinite(state[:6]))


def test_wall_stops_forward_motion():
    body = _body()
    state = _state(30.0, 55.0)
    _advance(state, body, [1.0, 1.0], steps=100)
    centers = body.cell_world_positions(state[0], state[1], state[2])
    assert centers[:, 1].max() <= 59.5 + 1e-9  # module discs stay inside


def test_obstacle_segment_blocks():
    body = _body()
    # Horizontal wall spanning the field at y = 40.
    segments = np.array([[0.0, 40.0, 60.0, 40.0]])
    state = _state(30.0, 30.0)
    _advance(state, body, [1.0, 1.0], segments=segments, steps=150)
    centers = body.cell_world_positions(state[0], state[1], state[2])
    # reach = module radius + wall thickness
    assert centers[:, 1].max() <= 40.0 - 0.74


def test_ball_gets_pushed():
    cfg = PhysicsConfig()
    body = _body()
    state = _state(30.0, 20.0)
    state[6:8] = (30.0, 24.0)  # ball straight ahead
    _advance(state, body, [1.0, 1.0], cfg=cfg, has_ball=True, steps=40)
    assert state[7] > 30.0  # ball pushed along +y
    # no interpenetration in open field
    centers = body.cell_world_positions(state[0], state[1], state[2])
    dists = np.hypot(centers[:, 0] - state[6], centers[:, 1] - state[7])
    assert dists.min() >= 0.5 + cfg.ball_radius - 1e-6


def test_ball_pinched_against_wall_stays_inside():
    cfg = PhysicsConfig()
    body = _body()
    state = _state(30.0, 20.0)
    state[6:8] = (30.0, 24.0)
    for _ in range(150):  # keep driving the ball into the top wall
        _advance(state, body, [1.0, 1.0], cfg=cfg, has_ball=True)
        assert cfg.ball_radius <= state[6] <= 60 - cfg.ball_radius
        assert cfg.ball_radius <= state[7] <= 60 - cfg.ball_radius


def test_single_module_robot_runs():
    body = RobotBody(morphology_from_text("W", dims=(1, 1)))
    state = _state()
    _advance(state, body, [1.0], steps=20)
    assert state[1] > 30.0


def test_non_finite_commands_rejected():
    body = _body()
    with pytest.raises(ValueError):
        _advance(_state(), body, [np.nan, 0.0])


@pytest.mark.skipif(len(available_backends()) < 2, reason="compiled backend not built")
def test_backends_agree_on_trajectories():
    backends = available_backends()
    body = _body()
    segments = np.array([[10.0, 40.0, 50.0, 42.0]])
    cfg = PhysicsConfig()
    params = pack_params(cfg, 1.0, 60.0, True)
    rng = np.random.default_rng(5)
    commands = rng.uniform(-1, 1, (300, 2))

    results = {}
    for name, kern in backends.items():
        state = _state(30.0, 20.0)
        state[6:8] = (32.0, 26.0)
        for t in range(300):
            kern.advance_world(
                state,
                body.module_local,
                body.wheel_local,
                np.ascontiguousarray(commands[t]),
                body.mass,
                body.inertia,
                segments,
                params,
                cfg.dt,
                cfg.substeps,
            )
        results[name] = state.copy()
    np.testing.assert_allclose(results["python"], results["compiled"], atol=1e-9)
