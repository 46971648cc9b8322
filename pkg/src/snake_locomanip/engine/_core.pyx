# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rollout kernel.

Mirrors engine.fallback.run step for step: forward kinematics and the
velocity/bias recursion over the 12-link chain, mass matrix and bias
assembly, penalty contact resolution (ground / box / static cuboids),
Cholesky solve, semi-implicit Euler integration, latch handling, and the
energy/effort accumulators. Self-contact is not supported here; the engine
routes those runs to the python kernel.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, fabs, isfinite, sin, sqrt
from libc.string cimport memset

cnp.import_array()

cdef int NL = 12
cdef int NJ = 11
cdef int NUC = 23
cdef int NUR = 17
cdef int BOX = 12


cdef inline void cross(double* a, double* b, double* out) noexcept:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double dot3(double* a, double* b) noexcept:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline void quat_to_R(double* q, double* R) noexcept:
    cdef double w = q[0], x = q[1], y = q[2], z = q[3]
    R[0] = 1 - 2 * (y * y + z * z); R[1] = 2 * (x * y - z * w); R[2] = 2 * (x * z + y * w)
    R[3] = 2 * (x * y + z * w); R[4] = 1 - 2 * (x * x + z * z); R[5] = 2 * (y * z - x * w)
    R[6] = 2 * (x * z - y * w); R[7] = 2 * (y * z + x * w); R[8] = 1 - 2 * (x * x + y * y)


cdef inline void quat_mul_c(double* a, double* b, double* out) noexcept:
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]


cdef inline void quat_normalize_c(double* q) noexcept:
    cdef double n = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n <= 1e-12:
        q[0] = 1.0; q[1] = q[2] = q[3] = 0.0
        return
    q[0] /= n; q[1] /= n; q[2] /= n; q[3] /= n


cdef inline void quat_integrate_c(double* q, double* w, double dt) noexcept:
    """In-place left-multiplication by exp of the world rotation vector."""
    cdef double v[3]
    cdef double dq[4]
    cdef double out[4]
    cdef double angle, half, s
    v[0] = w[0] * dt; v[1] = w[1] * dt; v[2] = w[2] * dt
    angle = sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if angle < 1e-12:
        dq[0] = 1.0; dq[1] = 0.5 * v[0]; dq[2] = 0.5 * v[1]; dq[3] = 0.5 * v[2]
        quat_normalize_c(dq)
    else:
        half = 0.5 * angle
        s = sin(half) / angle
        dq[0] = cos(half); dq[1] = s * v[0]; dq[2] = s * v[1]; dq[3] = s * v[2]
    quat_mul_c(dq, q, out)
    q[0] = out[0]; q[1] = out[1]; q[2] = out[2]; q[3] = out[3]


cdef inline void matvec3(double* R, double* v, double* out) noexcept:
    out[0] = R[0] * v[0] + R[1] * v[1] + R[2] * v[2]
    out[1] = R[3] * v[0] + R[4] * v[1] + R[5] * v[2]
    out[2] = R[6] * v[0] + R[7] * v[1] + R[8] * v[2]


cdef inline void matTvec3(double* R, double* v, double* out) noexcept:
    out[0] = R[0] * v[0] + R[3] * v[1] + R[6] * v[2]
    out[1] = R[1] * v[0] + R[4] * v[1] + R[7] * v[2]
    out[2] = R[2] * v[0] + R[5] * v[1] + R[8] * v[2]


cdef struct Kin:
    double lp[12][3]
    double lR[12][9]
    double jp[11][3]
    double ja[11][3]
    double omg[13][3]
    double vc[13][3]
    double alp[13][3]
    double ac[13][3]
    double boxp[3]
    double boxR[9]
    int latched


cdef void forward_kin(Kin* K, double* q, double* u, double module_L, double* dock) noexcept:
    cdef int k, i, child
    cdef double Lh = module_L * 0.5
    cdef double o[3]
    cdef double aw[3]
    cdef double Rc[9]
    cdef double r[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double c, s, ang, rate
    cdef double vo[3]
    cdef double tmp[3]
    cdef double ao[3]
    cdef double dq[9]

    for i in range(3):
        K.lp[0][i] = q[i]
        K.omg[0][i] = u[3 + i]
        K.vc[0][i] = u[i]
        K.alp[0][i] = 0.0
        K.ac[0][i] = 0.0
    quat_to_R(q + 3, &K.lR[0][0])

    for k in range(NJ):
        child = k + 1
        ang = q[7 + k]
        rate = u[6 + k]
        c = cos(ang); s = sin(ang)
        # joint origin: parent center + Rp * [Lh,0,0]
        for i in range(3):
            o[i] = K.lp[k][i] + K.lR[k][i * 3] * Lh
            K.jp[k][i] = o[i]
        if k % 2 == 0:  # yaw about local z
            for i in range(3):
                aw[i] = K.lR[k][i * 3 + 2]
            for i in range(3):
                Rc[i * 3] = c * K.lR[k][i * 3] + s * K.lR[k][i * 3 + 1]
                Rc[i * 3 + 1] = -s * K.lR[k][i * 3] + c * K.lR[k][i * 3 + 1]
                Rc[i * 3 + 2] = K.lR[k][i * 3 + 2]
        else:  # pitch about local y
            for i in range(3):
                aw[i] = K.lR[k][i * 3 + 1]
            for i in range(3):
                Rc[i * 3] = c * K.lR[k][i * 3] - s * K.lR[k][i * 3 + 2]
                Rc[i * 3 + 1] = K.lR[k][i * 3 + 1]
                Rc[i * 3 + 2] = s * K.lR[k][i * 3] + c * K.lR[k][i * 3 + 2]
        for i in range(9):
            K.lR[child][i] = Rc[i]
        for i in range(3):
            K.ja[k][i] = aw[i]
            K.lp[child][i] = o[i] + Rc[i * 3] * Lh
            K.omg[child][i] = K.omg[k][i] + rate * aw[i]

        # velocities
        for i in range(3):
            r[i] = o[i] - K.lp[k][i]
        cross(&K.omg[k][0], r, t1)
        for i in range(3):
            vo[i] = K.vc[k][i] + t1[i]
        for i in range(3):
            r[i] = K.lp[child][i] - o[i]
        cross(&K.omg[child][0], r, t1)
        for i in range(3):
            K.vc[child][i] = vo[i] + t1[i]

        # bias accelerations
        cross(&K.omg[k][0], aw, t1)
        for i in range(3):
            K.alp[child][i] = K.alp[k][i] + rate * t1[i]
        for i in range(3):
            r[i] = o[i] - K.lp[k][i]
        cross(&K.alp[k][0], r, t1)
        cross(&K.omg[k][0], r, t2)
        cross(&K.omg[k][0], t2, tmp)
        for i in range(3):
            ao[i] = K.ac[k][i] + t1[i] + tmp[i]
        for i in range(3):
            r[i] = K.lp[child][i] - o[i]
        cross(&K.alp[child][0], r, t1)
        cross(&K.omg[child][0], r, t2)
        cross(&K.omg[child][0], t2, tmp)
        for i in range(3):
            K.ac[child][i] = ao[i] + t1[i] + tmp[i]

    # box
    if K.latched:
        matvec3(&K.lR[0][0], dock, r)
        for i in range(3):
            K.boxp[i] = K.lp[0][i] + r[i]
        quat_to_R(dock + 3, dq)
        for i in range(3):
            K.boxR[i * 3] = K.lR[0][i * 3] * dq[0] + K.lR[0][i * 3 + 1] * dq[3] + K.lR[0][i * 3 + 2] * dq[6]
            K.boxR[i * 3 + 1] = K.lR[0][i * 3] * dq[1] + K.lR[0][i * 3 + 1] * dq[4] + K.lR[0][i * 3 + 2] * dq[7]
            K.boxR[i * 3 + 2] = K.lR[0][i * 3] * dq[2] + K.lR[0][i * 3 + 1] * dq[5] + K.lR[0][i * 3 + 2] * dq[8]
        for i in range(3):
            K.omg[BOX][i] = K.omg[0][i]
            K.alp[BOX][i] = K.alp[0][i]
        cross(&K.omg[0][0], r, t1)
        for i in range(3):
            K.vc[BOX][i] = K.vc[0][i] + t1[i]
        cross(&K.alp[0][0], r, t1)
        cross(&K.omg[0][0], r, t2)
        cross(&K.omg[0][0], t2, tmp)
        for i in range(3):
            K.ac[BOX][i] = K.ac[0][i] + t1[i] + tmp[i]
    else:
        for i in range(3):
            K.boxp[i] = q[18 + i]
            K.omg[BOX][i] = u[20 + i]
            K.vc[BOX][i] = u[17 + i]
            K.alp[BOX][i] = 0.0
            K.ac[BOX][i] = 0.0
        quat_to_R(q + 21, K.boxR)


cdef inline void body_cols(Kin* K, int body, int* ncols, int* cols) noexcept:
    """Column index list of the nonzero Jacobian columns for `body`."""
    cdef int i, npath
    if body == BOX and not K.latched:
        for i in range(6):
            cols[i] = 17 + i
        ncols[0] = 6
        return
    npath = body if body < BOX else 0
    for i in range(6):
        cols[i] = i
    for i in range(npath):
        cols[6 + i] = 6 + i
    ncols[0] = 6 + npath


cdef void point_jac(Kin* K, int body, double* x, double* Jv) noexcept:
    """Fill the nonzero part of the 3 x 23 linear-point Jacobian (column
    major over the body_cols list layout: base 6 + joint path, or box 6)."""
    cdef int i, k, npath
    cdef double r[3]
    cdef double col[3]
    memset(Jv, 0, sizeof(double) * 3 * NUC)
    if body == BOX and not K.latched:
        for i in range(3):
            Jv[i * NUC + 17 + i] = 1.0
            r[i] = x[i] - K.boxp[i]
        # -skew(r) columns on the angular part
        Jv[0 * NUC + 21] = r[2]; Jv[0 * NUC + 22] = -r[1]
        Jv[1 * NUC + 20] = -r[2]; Jv[1 * NUC + 22] = r[0]
        Jv[2 * NUC + 20] = r[1]; Jv[2 * NUC + 21] = -r[0]
        return
    for i in range(3):
        Jv[i * NUC + i] = 1.0
        r[i] = x[i] - K.lp[0][i]
    Jv[0 * NUC + 4] = r[2]; Jv[0 * NUC + 5] = -r[1]
    Jv[1 * NUC + 3] = -r[2]; Jv[1 * NUC + 5] = r[0]
    Jv[2 * NUC + 3] = r[1]; Jv[2 * NUC + 4] = -r[0]
    npath = body if body < BOX else 0
    for k in range(npath):
        for i in range(3):
            r[i] = x[i] - K.jp[k][i]
        cross(&K.ja[k][0], r, col)
        for i in range(3):
            Jv[i * NUC + 6 + k] = col[i]


cdef void ang_jac(Kin* K, int body, double* Jw) noexcept:
    cdef int i, k, npath
    memset(Jw, 0, sizeof(double) * 3 * NUC)
    if body == BOX and not K.latched:
        for i in range(3):
            Jw[i * NUC + 20 + i] = 1.0
        return
    for i in range(3):
        Jw[i * NUC + 3 + i] = 1.0
    npath = body if body < BOX else 0
    for k in range(npath):
        for i in range(3):
            Jw[i * NUC + 6 + k] = K.ja[k][i]


cdef void scatter_force(Kin* K, int body, double* p, double* f, double sign, double* Q) noexcept:
    """Q += sign * J_body(p)^T f."""
    cdef int i, k, npath
    cdef double r[3]
    cdef double m[3]
    cdef double col[3]
    if body == BOX and not K.latched:
        for i in range(3):
            Q[17 + i] += sign * f[i]
            r[i] = p[i] - K.boxp[i]
        cross(r, f, m)
        for i in range(3):
            Q[20 + i] += sign * m[i]
        return
    for i in range(3):
        Q[i] += sign * f[i]
        r[i] = p[i] - K.lp[0][i]
    cross(r, f, m)
    for i in range(3):
        Q[3 + i] += sign * m[i]
    npath = body if body < BOX else 0
    for k in range(npath):
        for i in range(3):
            r[i] = p[i] - K.jp[k][i]
        cross(&K.ja[k][0], r, col)
        Q[6 + k] += sign * dot3(col, f)


cdef inline void point_vel(Kin* K, int body, double* p, double* v) noexcept:
    cdef double r[3]
    cdef double t[3]
    cdef int i
    cdef double* c = &K.boxp[0] if body == BOX else &K.lp[body][0]
    for i in range(3):
        r[i] = p[i] - c[i]
    cross(&K.omg[body][0], r, t)
    for i in range(3):
        v[i] = K.vc[body][i] + t[i]


cdef inline double eff_mu(double v, double mu_s, double mu_d, double v_crit, double v_stick) noexcept:
    cdef double x
    if v <= v_stick:
        x = v / v_stick
        if x > 1.0:
            x = 1.0
        return mu_s * (3.0 * x * x - 2.0 * x * x * x)
    if v <= v_crit:
        return mu_s
    return mu_d + (mu_s - mu_d) * exp(1.0 - v / v_crit)


cdef double process_point(Kin* K, int body_a, int body_b, double* p, double* n, double d,
                          double k_n, double b_n, double w_n,
                          double mu_s, double mu_d, double v_crit, double v_stick,
                          double* Qc) noexcept:
    """Resolve one penalty contact, scatter its generalized force into Qc,
    and return the power delivered to the box when body_a is the box."""
    cdef double t1[3]
    cdef double t2[3]
    cdef double va[3]
    cdef double vb[3]
    cdef double vrel[3]
    cdef double f[3]
    cdef double z[3]
    cdef int i
    cdef double d_dot, x, s, fN, vt1, vt2, speed, mu, scale

    # tangent basis (matches the python construction)
    if fabs(n[2]) < 0.9:
        z[0] = 0.0; z[1] = 0.0; z[2] = 1.0
    else:
        z[0] = 1.0; z[1] = 0.0; z[2] = 0.0
    cross(n, z, t1)
    scale = sqrt(dot3(t1, t1))
    for i in range(3):
        t1[i] /= scale
    cross(n, t1, t2)

    if body_a == BOX:
        point_vel(K, BOX, p, va)
    else:
        va[0] = va[1] = va[2] = 0.0
    point_vel(K, body_b, p, vb)
    for i in range(3):
        vrel[i] = vb[i] - va[i]
    d_dot = -dot3(n, vrel)

    x = d / w_n
    if x < 0.0:
        x = 0.0
    elif x > 1.0:
        x = 1.0
    s = 3.0 * x * x - 2.0 * x * x * x
    fN = s * (k_n * d + b_n * d_dot)
    if fN < 0.0:
        fN = 0.0

    vt1 = dot3(t1, vrel)
    vt2 = dot3(t2, vrel)
    speed = sqrt(vt1 * vt1 + vt2 * vt2)
    for i in range(3):
        f[i] = fN * n[i]
    if speed > 0.0 and fN > 0.0:
        mu = eff_mu(speed, mu_s, mu_d, v_crit, v_stick)
        scale = -mu * fN / speed
        for i in range(3):
            f[i] += scale * (vt1 * t1[i] + vt2 * t2[i])

    scatter_force(K, body_b, p, f, 1.0, Qc)
    if body_a == BOX:
        scatter_force(K, BOX, p, f, -1.0, Qc)
        return -dot3(f, va)
    return 0.0


cdef int point_vs_cuboid(double* x, double* center, double* R, double* half,
                         double* sd, double* surf, double* n) noexcept:
    cdef double local[3]
    cdef double clamped[3]
    cdef double delta[3]
    cdef double rel[3]
    cdef double nl[3]
    cdef int i, axis, outside
    cdef double dist, best
    for i in range(3):
        rel[i] = x[i] - center[i]
    matTvec3(R, rel, local)
    outside = 0
    for i in range(3):
        clamped[i] = local[i]
        if clamped[i] > half[i]:
            clamped[i] = half[i]
            outside = 1
        elif clamped[i] < -half[i]:
            clamped[i] = -half[i]
            outside = 1
    if outside:
        for i in range(3):
            delta[i] = local[i] - clamped[i]
        dist = sqrt(dot3(delta, delta))
        for i in range(3):
            nl[i] = delta[i] / dist
        sd[0] = dist
    else:
        axis = 0
        best = half[0] - fabs(local[0])
        for i in range(1, 3):
            if half[i] - fabs(local[i]) < best:
                best = half[i] - fabs(local[i])
                axis = i
        sd[0] = -best
        nl[0] = nl[1] = nl[2] = 0.0
        nl[axis] = 1.0 if local[axis] >= 0 else -1.0
        clamped[axis] = half[axis] * nl[axis]
    matvec3(R, clamped, rel)
    for i in range(3):
        surf[i] = center[i] + rel[i]
    matvec3(R, nl, n)
    return 0


cdef int cholesky(double* A, int nd) noexcept:
    """In-place lower Cholesky of the leading nd x nd block (stride NUC)."""
    cdef int i, j, k
    cdef double s
    for j in range(nd):
        s = A[j * NUC + j]
        for k in range(j):
            s -= A[j * NUC + k] * A[j * NUC + k]
        if s <= 0.0:
            return -1
        A[j * NUC + j] = sqrt(s)
        for i in range(j + 1, nd):
            s = A[i * NUC + j]
            for k in range(j):
                s -= A[i * NUC + k] * A[j * NUC + k]
            A[i * NUC + j] = s / A[j * NUC + j]
    return 0


cdef void chol_solve(double* L, double* b, double* x, int nd) noexcept:
    cdef int i, k
    cdef double s
    for i in range(nd):
        s = b[i]
        for k in range(i):
            s -= L[i * NUC + k] * x[k]
        x[i] = s / L[i * NUC + i]
    for i in range(nd - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, nd):
            s -= L[k * NUC + i] * x[k]
        x[i] = s / L[i * NUC + i]


def run(double[::1] link_mass, double[:, ::1] link_inertia,
        double radius, double half_length, double module_L,
        double gravity, double box_mass, double[::1] box_inertia, double[::1] box_half,
        double[:, ::1] statics,
        double k_n, double b_n, double w_n,
        double mu_s, double mu_d, double v_crit, double v_stick,
        double kp, double kd, double lim_k, double lim_b,
        double tau_max, double q_lim,
        double[::1] socket_off, double engage_tol,
        double[::1] q, double[::1] u, int[::1] latch_io, double[::1] dock,
        double[:, ::1] q_ref, double[:, ::1] qd_ref, int[::1] latch_cmd,
        double dt, int stride, double t0,
        double[::1] t_out, double[:, ::1] q_out, double[:, ::1] u_out,
        double[:, ::1] tau_out, cnp.uint8_t[::1] latched_out,
        double[::1] wloc_out, double[::1] wbox_out, double[::1] eff_out):
    """Integrate len(q_ref) steps in place; returns (status, status_step, n_samples)."""
    cdef Kin K
    cdef int n = q_ref.shape[0]
    cdef int n_statics = statics.shape[0]
    cdef int i, j, kk, b, ci, cj, sample, nd, status, status_step, cmd, corner
    cdef double t = t0
    cdef double w_loc = 0.0, w_box = 0.0, effort = 0.0
    cdef double M[23 * 23]
    cdef double L[23 * 23]
    cdef double h[23]
    cdef double Qc[23]
    cdef double Qext[23]
    cdef double rhs[23]
    cdef double udot[23]
    cdef double xh[23]
    cdef double xy[23]
    cdef double tau[11]
    cdef double Jv[3 * 23]
    cdef double Jw[3 * 23]
    cdef double IwJw[3 * 23]
    cdef int cols[23]
    cdef int ncols
    cdef double Iw[9]
    cdef double Idiag[3]
    cdef double gyro[3]
    cdef double gmina[3]
    cdef double tmp[3]
    cdef double tmp2[3]
    cdef double e[3]
    cdef double p[3]
    cdef double nrm[3]
    cdef double surf[3]
    cdef double corners[8][3]
    cdef double d, sd, m_b, err, derr, over, pbox, eff_inst, gap
    cdef double up[3]
    cdef double sc[16]
    cdef double weld_v[3]
    cdef double weld_a[3]
    cdef double cb[4]
    cdef double bq[4]
    cdef double R0s[9]
    up[0] = 0.0; up[1] = 0.0; up[2] = 1.0

    status = 0
    status_step = -1
    sample = 0
    K.latched = latch_io[0]

    for i in range(n + 1):
        forward_kin(&K, &q[0], &u[0], module_L, &dock[0])

        if i < n:
            cmd = latch_cmd[i]
            if cmd == 1 and not K.latched:
                # engage when the head tip reaches the socket
                for j in range(3):
                    tmp[j] = K.lp[0][j] - K.lR[0][j * 3] * (module_L * 0.5)
                matvec3(K.boxR, &socket_off[0], tmp2)
                gap = 0.0
                for j in range(3):
                    tmp2[j] = K.boxp[j] + tmp2[j] - tmp[j]
                    gap += tmp2[j] * tmp2[j]
                if sqrt(gap) < engage_tol:
                    K.latched = 1
                    for j in range(3):
                        tmp[j] = K.boxp[j] - K.lp[0][j]
                    matTvec3(&K.lR[0][0], tmp, &dock[0])
                    # dock quat = conj(base) * box
                    cb[0] = q[3]; cb[1] = -q[4]; cb[2] = -q[5]; cb[3] = -q[6]
                    quat_mul_c(cb, &q[21], &dock[3])
                    # slave box velocity to the weld
                    cross(&u[3], tmp, tmp2)
                    for j in range(3):
                        u[20 + j] = u[3 + j]
                        u[17 + j] = u[j] + tmp2[j]
                    forward_kin(&K, &q[0], &u[0], module_L, &dock[0])
            elif cmd == 2 and K.latched:
                K.latched = 0
                forward_kin(&K, &q[0], &u[0], module_L, &dock[0])
            for j in range(NJ):
                err = q_ref[i, j]
                if err > q_lim:
                    err = q_lim
                elif err < -q_lim:
                    err = -q_lim
                err -= q[7 + j]
                derr = qd_ref[i, j] - u[6 + j]
                d = kp * err + kd * derr
                if d > tau_max:
                    d = tau_max
                elif d < -tau_max:
                    d = -tau_max
                tau[j] = d
        else:
            for j in range(NJ):
                err = q_ref[n - 1, j] if n > 0 else 0.0
                if err > q_lim:
                    err = q_lim
                elif err < -q_lim:
                    err = -q_lim
                err -= q[7 + j]
                derr = (qd_ref[n - 1, j] if n > 0 else 0.0) - u[6 + j]
                d = kp * err + kd * derr
                if d > tau_max:
                    d = tau_max
                elif d < -tau_max:
                    d = -tau_max
                tau[j] = d

        if i % stride == 0 or i == n:
            t_out[sample] = t
            for j in range(25):
                q_out[sample, j] = q[j]
            for j in range(NUC):
                u_out[sample, j] = u[j]
            for j in range(NJ):
                tau_out[sample, j] = tau[j]
            latched_out[sample] = 1 if K.latched else 0
            wloc_out[sample] = w_loc
            wbox_out[sample] = w_box
            eff_out[sample] = effort
            sample += 1
        if i == n:
            break

        # ---------------- mass matrix and bias forces ----------------
        memset(M, 0, sizeof(M))
        memset(h, 0, sizeof(h))
        for b in range(NL + 1):
            if b == BOX:
                m_b = box_mass
                for j in range(3):
                    Idiag[j] = box_inertia[j]
                # Iw = R diag R^T
                for j in range(3):
                    for kk in range(3):
                        Iw[j * 3 + kk] = (K.boxR[j * 3] * Idiag[0] * K.boxR[kk * 3]
                                          + K.boxR[j * 3 + 1] * Idiag[1] * K.boxR[kk * 3 + 1]
                                          + K.boxR[j * 3 + 2] * Idiag[2] * K.boxR[kk * 3 + 2])
                point_jac(&K, BOX, &K.boxp[0], Jv)
            else:
                m_b = link_mass[b]
                for j in range(3):
                    Idiag[j] = link_inertia[b, j]
                for j in range(3):
                    for kk in range(3):
                        Iw[j * 3 + kk] = (K.lR[b][j * 3] * Idiag[0] * K.lR[b][kk * 3]
                                          + K.lR[b][j * 3 + 1] * Idiag[1] * K.lR[b][kk * 3 + 1]
                                          + K.lR[b][j * 3 + 2] * Idiag[2] * K.lR[b][kk * 3 + 2])
                point_jac(&K, b, &K.lp[b][0], Jv)
            ang_jac(&K, b, Jw)
            body_cols(&K, b, &ncols, cols)

            for j in range(ncols):
                ci = cols[j]
                for kk in range(3):
                    IwJw[kk * NUC + ci] = (Iw[kk * 3] * Jw[0 * NUC + ci]
                                           + Iw[kk * 3 + 1] * Jw[1 * NUC + ci]
                                           + Iw[kk * 3 + 2] * Jw[2 * NUC + ci])
            # gyro = Iw*alpha + omega x (Iw*omega); gmina = g - a_bias
            matvec3(Iw, &K.omg[b][0], tmp)
            cross(&K.omg[b][0], tmp, tmp2)
            matvec3(Iw, &K.alp[b][0], tmp)
            for j in range(3):
                gyro[j] = tmp[j] + tmp2[j]
                gmina[j] = -K.ac[b][j]
            gmina[2] -= gravity
            for j in range(ncols):
                ci = cols[j]
                h[ci] += m_b * (gmina[0] * Jv[0 * NUC + ci] + gmina[1] * Jv[1 * NUC + ci]
                                + gmina[2] * Jv[2 * NUC + ci])
                h[ci] -= (gyro[0] * Jw[0 * NUC + ci] + gyro[1] * Jw[1 * NUC + ci]
                          + gyro[2] * Jw[2 * NUC + ci])
                for kk in range(j, ncols):
                    cj = cols[kk]
                    M[ci * NUC + cj] += m_b * (Jv[0 * NUC + ci] * Jv[0 * NUC + cj]
                                               + Jv[1 * NUC + ci] * Jv[1 * NUC + cj]
                                               + Jv[2 * NUC + ci] * Jv[2 * NUC + cj]) \
                        + (Jw[0 * NUC + ci] * IwJw[0 * NUC + cj]
                           + Jw[1 * NUC + ci] * IwJw[1 * NUC + cj]
                           + Jw[2 * NUC + ci] * IwJw[2 * NUC + cj])
        for ci in range(NUC):
            for cj in range(ci + 1, NUC):
                M[cj * NUC + ci] = M[ci * NUC + cj]
        for j in range(NJ):
            h[6 + j] += tau[j]
        if K.latched:
            for ci in range(NUR, NUC):
                h[ci] = 0.0
                for cj in range(NUC):
                    M[ci * NUC + cj] = 0.0
                    M[cj * NUC + ci] = 0.0
                M[ci * NUC + ci] = 1.0

        # ---------------- contacts ----------------
        memset(Qc, 0, sizeof(Qc))
        pbox = 0.0

        # link capsule ends vs ground
        for b in range(NL):
            for j in range(2):
                for kk in range(3):
                    e[kk] = K.lp[b][kk] + (half_length if j else -half_length) * K.lR[b][kk * 3]
                d = radius - e[2]
                if d > -w_n:
                    p[0] = e[0]; p[1] = e[1]; p[2] = e[2] - radius
                    pbox += process_point(&K, -1, b, p, up, d, k_n, b_n, w_n,
                                          mu_s, mu_d, v_crit, v_stick, Qc)

        # box corners (reused below for statics too)
        corner = 0
        for ci in range(2):
            for cj in range(2):
                for kk in range(2):
                    tmp[0] = (1.0 if ci else -1.0) * box_half[0]
                    tmp[1] = (1.0 if cj else -1.0) * box_half[1]
                    tmp[2] = (1.0 if kk else -1.0) * box_half[2]
                    matvec3(K.boxR, tmp, tmp2)
                    for j in range(3):
                        corners[corner][j] = K.boxp[j] + tmp2[j]
                    corner += 1
        for j in range(8):
            d = -corners[j][2]
            if d > -w_n:
                pbox += process_point(&K, -1, BOX, &corners[j][0], up, d, k_n, b_n, w_n,
                                      mu_s, mu_d, v_crit, v_stick, Qc)

        # link capsule ends vs box
        if not K.latched:
            for b in range(NL):
                for j in range(2):
                    for kk in range(3):
                        e[kk] = K.lp[b][kk] + (half_length if j else -half_length) * K.lR[b][kk * 3]
                    point_vs_cuboid(e, &K.boxp[0], K.boxR, &box_half[0], &sd, surf, nrm)
                    d = radius - sd
                    if d > -w_n:
                        pbox += process_point(&K, BOX, b, surf, nrm, d, k_n, b_n, w_n,
                                              mu_s, mu_d, v_crit, v_stick, Qc)

        # static cuboids
        for ci in range(n_statics):
            for j in range(16):
                sc[j] = statics[ci, j]
            for b in range(NL):
                for j in range(2):
                    for kk in range(3):
                        e[kk] = K.lp[b][kk] + (half_length if j else -half_length) * K.lR[b][kk * 3]
                    point_vs_cuboid(e, &sc[0], &sc[6], &sc[3], &sd, surf, nrm)
                    d = radius - sd
                    if d > -w_n:
                        pbox += process_point(&K, -1, b, surf, nrm, d, k_n, b_n, w_n,
                                              mu_s, mu_d, v_crit, v_stick, Qc)
            for j in range(8):
                point_vs_cuboid(&corners[j][0], &sc[0], &sc[6], &sc[3], &sd, surf, nrm)
                d = -sd
                if d > -w_n:
                    pbox += process_point(&K, -1, BOX, &corners[j][0], nrm, d, k_n, b_n, w_n,
                                          mu_s, mu_d, v_crit, v_stick, Qc)

        # hard-stop torques past the travel limit (mechanical, unclamped)
        for j in range(NUC):
            Qext[j] = Qc[j]
        for j in range(NJ):
            over = 0.0
            if q[7 + j] > q_lim:
                over = q[7 + j] - q_lim
            elif q[7 + j] < -q_lim:
                over = q[7 + j] + q_lim
            if over != 0.0:
                Qext[6 + j] += -lim_k * over - lim_b * u[6 + j]

        # ---------------- solve and integrate ----------------
        nd = NUR if K.latched else NUC
        for j in range(NUC * NUC):
            L[j] = M[j]
        if cholesky(L, nd) != 0:
            status = 1
            status_step = i
            break
        for j in range(nd):
            rhs[j] = h[j] + Qext[j]
        chol_solve(L, rhs, udot, nd)
        chol_solve(L, h, xh, nd)
        chol_solve(L, Qc, xy, nd)
        for j in range(nd, NUC):
            udot[j] = 0.0
        eff_inst = 0.0
        for j in range(nd):
            eff_inst += Qc[j] * (0.5 * xy[j] + xh[j])
        for j in range(nd):
            if not isfinite(udot[j]):
                status = 1
                status_step = i
                break
        if status:
            break

        # accumulators
        for j in range(NJ):
            w_loc += dt * fabs(tau[j] * u[6 + j])
        effort += dt * eff_inst
        if K.latched:
            # weld power on the box: m (a - g) . v + (Iw wdot + w x Iw w) . w
            point_jac(&K, BOX, &K.boxp[0], Jv)
            for j in range(3):
                weld_a[j] = K.ac[BOX][j]
                for kk in range(NUC):
                    weld_a[j] += Jv[j * NUC + kk] * udot[kk]
                weld_v[j] = K.vc[BOX][j]
            weld_a[2] += gravity
            pbox += box_mass * dot3(weld_a, weld_v)
            for j in range(3):
                for kk in range(3):
                    Iw[j * 3 + kk] = (K.boxR[j * 3] * box_inertia[0] * K.boxR[kk * 3]
                                      + K.boxR[j * 3 + 1] * box_inertia[1] * K.boxR[kk * 3 + 1]
                                      + K.boxR[j * 3 + 2] * box_inertia[2] * K.boxR[kk * 3 + 2])
            for j in range(3):
                tmp[j] = K.alp[BOX][j] + udot[3 + j]
            matvec3(Iw, tmp, tmp2)
            matvec3(Iw, &K.omg[BOX][0], tmp)
            cross(&K.omg[BOX][0], tmp, gyro)
            for j in range(3):
                tmp2[j] += gyro[j]
            pbox += dot3(tmp2, &K.omg[BOX][0])
        w_box += dt * pbox

        for j in range(NUC):
            u[j] += dt * udot[j]
        if K.latched:
            for j in range(NUR, NUC):
                u[j] = 0.0
        for j in range(3):
            q[j] += dt * u[j]
            q[18 + j] += dt * u[17 + j]
        for j in range(NJ):
            q[7 + j] += dt * u[6 + j]
        quat_integrate_c(&q[3], &u[3], dt)
        quat_integrate_c(&q[21], &u[20], dt)
        t += dt
        if K.latched:
            quat_to_R(&q[3], R0s)
            matvec3(R0s, &dock[0], tmp)
            for j in range(3):
                q[18 + j] = q[j] + tmp[j]
            quat_mul_c(&q[3], &dock[3], bq)
            quat_normalize_c(bq)
            for j in range(4):
                q[21 + j] = bq[j]
            cross(&u[3], tmp, tmp2)
            for j in range(3):
                u[20 + j] = u[3 + j]
                u[17 + j] = u[j] + tmp2[j]
        quat_normalize_c(&q[3])
        quat_normalize_c(&q[21])
        for j in range(25):
            if not isfinite(q[j]):
                status = 1
                status_step = i
                break
        if status:
            break

    latch_io[0] = K.latched
    return status, status_step, sample
