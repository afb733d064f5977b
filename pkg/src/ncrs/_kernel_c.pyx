# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the grid-update and world-integration kernels.

Same contracts as ncrs._kernel_py; see that module for the parameter
packing. Loops are sequential, so results are deterministic.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"


def step_cells(
    cnp.ndarray[cnp.float64_t, ndim=3] values,
    updatable,
    cnp.ndarray[cnp.float64_t, ndim=2] conv_w,
    cnp.ndarray[cnp.float64_t, ndim=1] conv_b,
    cnp.ndarray[cnp.float64_t, ndim=2] dense1_w,
    cnp.ndarray[cnp.float64_t, ndim=1] dense1_b,
    cnp.ndarray[cnp.float64_t, ndim=2] dense2_w,
    cnp.ndarray[cnp.float64_t, ndim=1] dense2_b,
):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] mask = np.ascontiguousarray(
        updatable, dtype=np.uint8
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = values.copy()
    cdef Py_ssize_t h = values.shape[0]
    cdef Py_ssize_t w = values.shape[1]
    cdef Py_ssize_t n = values.shape[2]
    cdef Py_ssize_t n_filters = conv_w.shape[0]
    cdef Py_ssize_t n_units = dense1_w.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] h1 = np.empty(n_filters)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] h2 = np.empty(n_units)
    cdef Py_ssize_t r, c, f, j, k, dy, dx, ch, rr, cc
    cdef double acc, v

    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            # conv over the 3x3xn patch, zero padding past the border;
            # weight index order matches the (dy, dx, channel) flattening.
            for f in range(n_filters):
                acc = conv_b[f]
                k = 0
                for dy in range(3):
                    rr = r + dy - 1
                    for dx in range(3):
                        cc = c + dx - 1
                        if 0 <= rr < h and 0 <= cc < w:
                            for ch in range(n):
                                acc += conv_w[f, k + ch] * values[rr, cc, ch]
                        k += n
                h1[f] = acc if acc > 0.0 else 0.0
            for j in range(n_units):
                acc = dense1_b[j]
                for f in range(n_filters):
                    acc += h1[f] * dense1_w[f, j]
                h2[j] = acc if acc > 0.0 else 0.0
            for ch in range(n):
                acc = dense2_b[ch]
                for j in range(n_units):
                    acc += h2[j] * dense2_w[j, ch]
                v = values[r, c, ch] + acc
                if v > 5.0:
                    v = 5.0
                elif v < -5.0:
                    v = -5.0
                out[r, c, ch] = v
    return out


cdef inline void _contact_impulse(
    double* st, double rx, double ry, double nx, double ny,
    double inv_m, double inv_i, double mu,
) noexcept:
    cdef double relx = st[3] - st[5] * ry
    cdef double rely = st[4] + st[5] * rx
    cdef double vn = relx * nx + rely * ny
    cdef double rn, jn, tx, ty, vt, rt, jt, cap
    if vn >= 0.0:
        return
    rn = rx * ny - ry * nx
    jn = -vn / (inv_m + rn * rn * inv_i)
    st[3] += jn * nx * inv_m
    st[4] += jn * ny * inv_m
    st[5] += jn * rn * inv_i
    tx = -ny
    ty = nx
    relx = st[3] - st[5] * ry
    rely = st[4] + st[5] * rx
    vt = relx * tx + rely * ty
    rt = rx * ty - ry * tx
    jt = -vt / (inv_m + rt * rt * inv_i)
    cap = mu * jn
    if jt > cap:
        jt = cap
    elif jt < -cap:
        jt = -cap
    st[3] += jt * tx * inv_m
    st[4] += jt * ty * inv_m
    st[5] += jt * rt * inv_i


def advance_world(
    cnp.ndarray[cnp.float64_t, ndim=1] state,
    cnp.ndarray[cnp.float64_t, ndim=2] module_local,
    cnp.ndarray[cnp.float64_t, ndim=2] wheel_local,
    cnp.ndarray[cnp.float64_t, ndim=1] commands,
    double mass,
    double inertia,
    cnp.ndarray[cnp.float64_t, ndim=2] segments,
    cnp.ndarray[cnp.float64_t, ndim=1] params,
    double dt,
    int substeps,
):
    cdef double sub_dt = dt / substeps
    cdef double inv_m = 1.0 / mass
    cdef double inv_i = 1.0 / inertia
    cdef double v_max = params[0]
    cdef double drive = params[1]
    cdef double lat = params[2]
    cdef double lin_drag = params[3]
    cdef double ang_drag = params[4]
    cdef double wall_mu = params[5]
    cdef double wall_thick = params[6]
    cdef double mod_r = params[7]
    cdef double ball_r = params[8]
    cdef double inv_mb = 1.0 / params[9]
    cdef double ball_drag = params[10]
    cdef double pf = params[11]
    cdef bint has_ball = params[12] != 0.0
    cdef Py_ssize_t n_mod = module_local.shape[0]
    cdef Py_ssize_t n_wheel = wheel_local.shape[0]
    cdef Py_ssize_t n_seg = segments.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] off_arr = np.empty((n_mod, 2))
    cdef double* st = <double*> state.data
    cdef Py_ssize_t step, i, wall, seg, best
    cdef double c, s, fx, fy, fwx, fwy, rwx, rwy, pvx, pvy, vl, mag
    cdef double force_x, force_y, torque, pen, best_pen, nx, ny
    cdef double dxs, dys, denom, t, cx, cy, dist, reach
    cdef double relx, rely, vn, rn, j, inv_sum, axis_pos

    for step in range(substeps):
        c = cos(st[2])
        s = sin(st[2])
        fwx = -s
        fwy = c
        force_x = 0.0
        force_y = 0.0
        torque = 0.0
        for i in range(n_wheel):
            rwx = c * wheel_local[i, 0] - s * wheel_local[i, 1]
            rwy = s * wheel_local[i, 0] + c * wheel_local[i, 1]
            pvx = st[3] - st[5] * rwy
            pvy = st[4] + st[5] * rwx
            vl = pvx * fwx + pvy * fwy
            mag = drive * (commands[i] * v_max - vl)
            fx = mag * fwx - lat * (pvx - vl * fwx)
            fy = mag * fwy - lat * (pvy - vl * fwy)
            force_x += fx
            force_y += fy
            torque += rwx * fy - rwy * fx
        force_x -= lin_drag * mass * st[3]
        force_y -= lin_drag * mass * st[4]
        torque -= ang_drag * inertia * st[5]

        st[3] += force_x * inv_m * sub_dt
        st[4] += force_y * inv_m * sub_dt
        st[5] += torque * inv_i * sub_dt
        st[0] += st[3] * sub_dt
        st[1] += st[4] * sub_dt
        st[2] += st[5] * sub_dt

        if has_ball:
            st[8] -= ball_drag * st[8] * sub_dt
            st[9] -= ball_drag * st[9] * sub_dt
            st[6] += st[8] * sub_dt
            st[7] += st[9] * sub_dt

        c = cos(st[2])
        s = sin(st[2])
        for i in range(n_mod):
            off_arr[i, 0] = c * module_local[i, 0] - s * module_local[i, 1]
            off_arr[i, 1] = s * module_local[i, 0] + c * module_local[i, 1]

        # Playfield walls, fixed order: x-, x+, y-, y+.
        for wall in range(4):
            best = 0
            best_pen = -1.0
            for i in range(n_mod):
                if wall == 0:
                    pen = mod_r - (st[0] + off_arr[i, 0])
                elif wall == 1:
                    pen = (st[0] + off_arr[i, 0]) - (pf - mod_r)
                elif wall == 2:
                    pen = mod_r - (st[1] + off_arr[i, 1])
                else:
                    pen = (st[1] + off_arr[i, 1]) - (pf - mod_r)
                if pen > best_pen:
                    best_pen = pen
                    best = i
            if best_pen <= 0.0:
                continue
            if wall == 0:
                nx = 1.0
                ny = 0.0
            elif wall == 1:
                nx = -1.0
                ny = 0.0
            elif wall == 2:
                nx = 0.0
                ny = 1.0
            else:
                nx = 0.0
                ny = -1.0
            st[0] += nx * best_pen
            st[1] += ny * best_pen
            _contact_impulse(st, off_arr[best, 0], off_arr[best, 1], nx, ny,
                             inv_m, inv_i, wall_mu)

        reach = mod_r + wall_thick
        for seg in range(n_seg):
            dxs = segments[seg, 2] - segments[seg, 0]
            dys = segments[seg, 3] - segments[seg, 1]
            denom = dxs * dxs + dys * dys
            best = -1
            best_pen = 0.0
            nx = 0.0
            ny = 0.0
            for i in range(n_mod):
                pvx = st[0] + off_arr[i, 0]
                pvy = st[1] + off_arr[i, 1]
                if denom == 0.0:
                    t = 0.0
                else:
                    t = ((pvx - segments[seg, 0]) * dxs + (pvy - segments[seg, 1]) * dys) / denom
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                cx = segments[seg, 0] + t * dxs
                cy = segments[seg, 1] + t * dys
                dist = sqrt((pvx - cx) * (pvx - cx) + (pvy - cy) * (pvy - cy))
                pen = reach - dist
                if pen > best_pen and dist > 1e-12:
                    best_pen = pen
                    best = i
                    nx = (pvx - cx) / dist
                    ny = (pvy - cy) / dist
            if best < 0:
                continue
            st[0] += nx * best_pen
            st[1] += ny * best_pen
            _contact_impulse(st, off_arr[best, 0], off_arr[best, 1], nx, ny,
                             inv_m, inv_i, wall_mu)

        if not has_ball:
            continue

        best = -1
        best_pen = 0.0
        nx = 0.0
        ny = 0.0
        for i in range(n_mod):
            dxs = st[6] - (st[0] + off_arr[i, 0])
            dys = st[7] - (st[1] + off_arr[i, 1])
            dist = sqrt(dxs * dxs + dys * dys)
            pen = (mod_r + ball_r) - dist
            if pen > best_pen and dist > 1e-12:
                best_pen = pen
                best = i
                nx = dxs / dist
                ny = dys / dist
        if best >= 0:
            inv_sum = inv_m + inv_mb
            st[6] += nx * best_pen * (inv_mb / inv_sum)
            st[7] += ny * best_pen * (inv_mb / inv_sum)
            st[0] -= nx * best_pen * (inv_m / inv_sum)
            st[1] -= ny * best_pen * (inv_m / inv_sum)

            rwx = off_arr[best, 0]
            rwy = off_arr[best, 1]
            relx = st[8] - (st[3] - st[5] * rwy)
            rely = st[9] - (st[4] + st[5] * rwx)
            vn = relx * nx + rely * ny
            if vn < 0.0:
                rn = rwx * ny - rwy * nx
                j = -vn / (inv_m + rn * rn * inv_i + inv_mb)
                st[3] -= j * nx * inv_m
                st[4] -= j * ny * inv_m
                st[5] -= j * rn * inv_i
                st[8] += j * nx * inv_mb
                st[9] += j * ny * inv_mb

        # Ball vs walls last, so the ball always ends the substep in bounds.
        for i in range(2):
            axis_pos = st[6 + i]
            if axis_pos < ball_r:
                st[6 + i] = ball_r
                if st[8 + i] < 0.0:
                    st[8 + i] = 0.0
            elif axis_pos > pf - ball_r:
                st[6 + i] = pf - ball_r
                if st[8 + i] > 0.0:
                    st[8 + i] = 0.0
