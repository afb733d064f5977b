"""Numpy implementations of the two hot kernels.

``step_cells`` advances the cellular grid one synchronous step;
``advance_world`` integrates the rigid-body world over one environment
step. ``ncrs._kernel_c`` provides compiled equivalents with the same
signatures; ``ncrs.backend`` picks one pair at import time.

Both backends are deterministic. Results agree to floating-point
round-off (summation order differs), not bit-for-bit; see README.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def step_cells(
    values: np.ndarray,
    updatable: np.ndarray,
    conv_w: np.ndarray,
    conv_b: np.ndarray,
    dense1_w: np.ndarray,
    dense1_b: np.ndarray,
    dense2_w: np.ndarray,
    dense2_b: np.ndarray,
) -> np.ndarray:
    """One synchronous grid update.

    For every updatable cell the 3x3xn neighborhood (zero padding past
    the border) runs through conv -> relu -> dense -> relu -> dense; the
    result is added to the cell state and clipped to [-5, 5]. Cells
    outside ``updatable`` are returned bit-identical. All deltas are
    computed from the pre-step grid.
    """
    h, w, n = values.shape
    padded = np.zeros((h + 2, w + 2, n), dtype=np.float64)
    padded[1:-1, 1:-1, :] = values
    # (h, w, n, 3, 3) -> (h*w, 3*3*n) with patch order (dy, dx, channel)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(0, 1))
    patches = windows.transpose(0, 1, 3, 4, 2).reshape(h * w, 9 * n)

    a = np.maximum(patches @ conv_w.T + conv_b, 0.0)
    a = np.maximum(a @ dense1_w + dense1_b, 0.0)
    delta = (a @ dense2_w + dense2_b).reshape(h, w, n)

    out = values.copy()
    mask = updatable.astype(bool)
    out[mask] = np.clip(values[mask] + delta[mask], -5.0, 5.0)
    return out


# advance_world parameter packing (mirrored in _kernel_c.pyx):
#   state: [x, y, heading, vx, vy, omega, ball_x, ball_y, ball_vx, ball_vy]
#   params: [v_max, drive_gain, lateral_damping, linear_drag, angular_drag,
#            wall_friction, wall_thickness, module_radius, ball_radius,
#            ball_mass, ball_drag, playfield, has_ball]
P_VMAX = 0
P_DRIVE = 1
P_LAT = 2
P_LIN_DRAG = 3
P_ANG_DRAG = 4
P_WALL_MU = 5
P_WALL_THICK = 6
P_MOD_RADIUS = 7
P_BALL_RADIUS = 8
P_BALL_MASS = 9
P_BALL_DRAG = 10
P_PLAYFIELD = 11
P_HAS_BALL = 12
N_PARAMS = 13


def _contact_impulse(state, rx, ry, nx, ny, inv_m, inv_i, mu):
    """Restitution-0 impulse (plus friction clamp) against a static wall."""
    relx = state[3] - state[5] * ry
    rely = state[4] + state[5] * rx
    vn = relx * nx + rely * ny
    if vn >= 0.0:
        return
    rn = rx * ny - ry * nx
    jn = -vn / (inv_m + rn * rn * inv_i)
    state[3] += jn * nx * inv_m
    state[4] += jn * ny * inv_m
    state[5] += jn * rn * inv_i
    # Coulomb friction on the tangential contact velocity.
    tx, ty = -ny, nx
    relx = state[3] - state[5] * ry
    rely = state[4] + state[5] * rx
    vt = relx * tx + rely * ty
    rt = rx * ty - ry * tx
    jt = -vt / (inv_m + rt * rt * inv_i)
    cap = mu * jn
    jt = min(max(jt, -cap), cap)
    state[3] += jt * tx * inv_m
    state[4] += jt * ty * inv_m
    state[5] += jt * rt * inv_i


def _segment_closest(centers, seg):
    dx = seg[2] - seg[0]
    dy = seg[3] - seg[1]
    denom = dx * dx + dy * dy
    if denom == 0.0:
        t = np.zeros(centers.shape[0])
    else:
        t = ((centers[:, 0] - seg[0]) * dx + (centers[:, 1] - seg[1]) * dy) / denom
        t = np.clip(t, 0.0, 1.0)
    return seg[0] + t * dx, seg[1] + t * dy


def advance_world(
    state: np.ndarray,
    module_local: np.ndarray,
    wheel_local: np.ndarray,
    commands: np.ndarray,
    mass: float,
    inertia: float,
    segments: np.ndarray,
    params: np.ndarray,
    dt: float,
    substeps: int,
) -> None:
    """Integrate the world in place over ``dt`` using ``substeps`` substeps.

    Each wheel pushes along the body's +y axis with a force proportional
    to its command slip (command * v_max minus the wheel's longitudinal
    ground speed); lateral slip at each wheel is damped. Semi-implicit
    Euler, then restitution-0 contacts against the playfield walls, the
    obstacle segments, and the ball. Contacts resolve in a fixed order
    (walls, segments, ball), one deepest module per collider.
    """
    sub_dt = dt / substeps
    inv_m = 1.0 / mass
    inv_i = 1.0 / inertia
    mod_r = params[P_MOD_RADIUS]
    pf = params[P_PLAYFIELD]
    has_ball = params[P_HAS_BALL] != 0.0
    perp = np.array([[0.0, 1.0], [-1.0, 0.0]])  # row-vector form of r -> (-ry, rx)

    for _ in range(substeps):
        c, s = np.cos(state[2]), np.sin(state[2])
        rot_t = np.array([[c, s], [-s, c]])  # row-vector form of R(theta)
        fwd = np.array([-s, c])
        vel = state[3:5]
        om = state[5]

        if wheel_local.shape[0]:
            rw = wheel_local @ rot_t
            pv = vel + om * (rw @ perp)
            vl = pv @ fwd
            f_wheel = (params[P_DRIVE] * (commands * params[P_VMAX] - vl))[:, None] * fwd
            f_wheel -= params[P_LAT] * (pv - vl[:, None] * fwd)
            force = f_wheel.sum(axis=0)
            torque = float(np.sum(rw[:, 0] * f_wheel[:, 1] - rw[:, 1] * f_wheel[:, 0]))
        else:
            force = np.zeros(2)
            torque = 0.0

        force = force - params[P_LIN_DRAG] * mass * vel
        torque -= params[P_ANG_DRAG] * inertia * om

        state[3:5] += force * inv_m * sub_dt
        state[5] += torque * inv_i * sub_dt
        state[0:2] += state[3:5] * sub_dt
        state[2] += state[5] * sub_dt

        if has_ball:
            state[8:10] -= params[P_BALL_DRAG] * state[8:10] * sub_dt
            state[6:8] += state[8:10] * sub_dt

        c, s = np.cos(state[2]), np.sin(state[2])
        rot_t = np.array([[c, s], [-s, c]])
        offsets = module_local @ rot_t
        centers = state[0:2] + offsets

        # Playfield walls, fixed order: x-, x+, y-, y+.
        for wall in range(4):
            if wall == 0:
                pen = mod_r - centers[:, 0]
                nx, ny = 1.0, 0.0
            elif wall == 1:
                pen = centers[:, 0] - (pf - mod_r)
                nx, ny = -1.0, 0.0
            elif wall == 2:
                pen = mod_r - centers[:, 1]
                nx, ny = 0.0, 1.0
            else:
                pen = centers[:, 1] - (pf - mod_r)
                nx, ny = 0.0, -1.0
            i = int(np.argmax(pen))
            if pen[i] <= 0.0:
                continue
            state[0] += nx * pen[i]
            state[1] += ny * pen[i]
            centers = state[0:2] + offsets
            _contact_impulse(
                state, offsets[i, 0], offsets[i, 1], nx, ny, inv_m, inv_i, params[P_WALL_MU]
            )

        reach = mod_r + params[P_WALL_THICK]
        for seg in segments:
            cx, cy = _segment_closest(centers, seg)
            dx = centers[:, 0] - cx
            dy = centers[:, 1] - cy
            dist = np.sqrt(dx * dx + dy * dy)
            pen = reach - dist
            i = int(np.argmax(pen))
            if pen[i] <= 0.0 or dist[i] <= 1e-12:
                continue
            nx, ny = dx[i] / dist[i], dy[i] / dist[i]
            state[0] += nx * pen[i]
            state[1] += ny * pen[i]
            centers = state[0:2] + offsets
            _contact_impulse(
                state, offsets[i, 0], offsets[i, 1], nx, ny, inv_m, inv_i, params[P_WALL_MU]
            )

        if has_ball:
            _ball_contacts(state, centers, offsets, inv_m, inv_i, params)


def _ball_contacts(state, centers, offsets, inv_m, inv_i, params):
    ball_r = params[P_BALL_RADIUS]
    pf = params[P_PLAYFIELD]
    inv_mb = 1.0 / params[P_BALL_MASS]

    _ball_robot_contact(state, centers, offsets, inv_m, inv_i, params, ball_r, inv_mb)

    # Ball vs walls last, so the ball always ends the substep in bounds.
    for axis in range(2):
        if state[6 + axis] < ball_r:
            state[6 + axis] = ball_r
            if state[8 + axis] < 0.0:
                state[8 + axis] = 0.0
        elif state[6 + axis] > pf - ball_r:
            state[6 + axis] = pf - ball_r
            if state[8 + axis] > 0.0:
                state[8 + axis] = 0.0


def _ball_robot_contact(state, centers, offsets, inv_m, inv_i, params, ball_r, inv_mb):
    dx = state[6] - centers[:, 0]
    dy = state[7] - centers[:, 1]
    dist = np.sqrt(dx * dx + dy * dy)
    pen = (params[P_MOD_RADIUS] + ball_r) - dist
    i = int(np.argmax(pen))
    if pen[i] <= 0.0 or dist[i] <= 1e-12:
        return
    nx, ny = dx[i] / dist[i], dy[i] / dist[i]
    # Separate the pair along the normal, split by inverse mass.
    inv_sum = inv_m + inv_mb
    state[6] += nx * pen[i] * (inv_mb / inv_sum)
    state[7] += ny * pen[i] * (inv_mb / inv_sum)
    state[0] -= nx * pen[i] * (inv_m / inv_sum)
    state[1] -= ny * pen[i] * (inv_m / inv_sum)

    rx, ry = offsets[i, 0], offsets[i, 1]
    relx = state[8] - (state[3] - state[5] * ry)
    rely = state[9] - (state[4] + state[5] * rx)
    vn = relx * nx + rely * ny
    if vn >= 0.0:
        return
    rn = rx * ny - ry * nx
    j = -vn / (inv_m + rn * rn * inv_i + inv_mb)
    state[3] -= j * nx * inv_m
    state[4] -= j * ny * inv_m
    state[5] -= j * rn * inv_i
    state[8] += j * nx * inv_mb
    state[9] += j * ny * inv_mb
