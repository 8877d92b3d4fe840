"""Low-level kernels shared by the spatial, dynamics and cost layers.

Every function here is dtype-generic: it runs on float64 for evaluation and
on complex128 for complex-step differentiation.  Branches therefore test the
real part only, and no routine uses ``abs``/conjugation on a value that may
carry a derivative.

Spatial vectors are stored angular-first: motion ``(w, v)``, force ``(n, f)``.

A kinematic tree is passed around as a plain tuple::

    (jtype, parent, iq, iv, R0, t0, axis, inertia)

with joint kinds FREE (config ``t, quat``; tangent ``v_world, w_body``),
SPHERICAL (config ``quat``; tangent ``w_body``) and PRISMATIC (scalar along a
fixed axis of the joint placement frame).
"""
import numpy as np

from ._accel import kernel

FREE = 0
SPHERICAL = 1
PRISMATIC = 2

NQ = (7, 4, 1)
NV = (6, 3, 1)


# --------------------------------------------------------------------------
# small vector / matrix helpers


@kernel
def cross3(a, b):
    out = np.full(3, 0.0 * (a[0] * b[0]))
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@kernel
def mat3_vec(A, x):
    out = np.full(3, 0.0 * (A[0, 0] * x[0]))
    for i in range(3):
        out[i] = A[i, 0] * x[0] + A[i, 1] * x[1] + A[i, 2] * x[2]
    return out


@kernel
def mat3T_vec(A, x):
    out = np.full(3, 0.0 * (A[0, 0] * x[0]))
    for i in range(3):
        out[i] = A[0, i] * x[0] + A[1, i] * x[1] + A[2, i] * x[2]
    return out


@kernel
def mat3_mul(A, B):
    out = np.full((3, 3), 0.0 * (A[0, 0] * B[0, 0]))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


@kernel
def mat3T_mul(A, B):
    out = np.full((3, 3), 0.0 * (A[0, 0] * B[0, 0]))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[0, i] * B[0, j] + A[1, i] * B[1, j] + A[2, i] * B[2, j]
    return out


# --------------------------------------------------------------------------
# quaternions (w, x, y, z)


@kernel
def quat_mul(a, b):
    out = np.full(4, 0.0 * (a[0] * b[0]))
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]
    return out


@kernel
def quat_conj(a):
    out = np.empty(4, dtype=a.dtype)
    out[0] = a[0]
    out[1] = -a[1]
    out[2] = -a[2]
    out[3] = -a[3]
    return out


@kernel
def quat_normalize(a):
    n = np.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3])
    out = a / n
    if out[0].real < 0.0:
        out = -out
    return out


@kernel
def quat_to_rot(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3), dtype=q.dtype)
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@kernel
def quat_exp(w):
    """Unit quaternion of the rotation vector ``w``."""
    th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    out = np.empty(4, dtype=w.dtype)
    if th2.real < 1e-4:
        c = 1.0 - th2 / 8.0 + th2 * th2 / 384.0 - th2 * th2 * th2 / 46080.0
        s = 0.5 - th2 / 48.0 + th2 * th2 / 3840.0 - th2 * th2 * th2 / 645120.0
    else:
        th = np.sqrt(th2)
        c = np.cos(0.5 * th)
        s = np.sin(0.5 * th) / th
    out[0] = c
    out[1] = s * w[0]
    out[2] = s * w[1]
    out[3] = s * w[2]
    return out


@kernel
def quat_log(q):
    """Rotation vector of a unit quaternion, taking the w >= 0 representative."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    if w.real < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s2 = x * x + y * y + z * z
    w2 = w * w
    out = np.empty(3, dtype=q.dtype)
    if s2.real < 1e-3 * w2.real:
        u = s2 / w2
        f = 2.0 / w * (1.0 - u / 3.0 + u * u / 5.0 - u * u * u / 7.0
                       + u * u * u * u / 9.0 - u * u * u * u * u / 11.0)
    else:
        s = np.sqrt(s2)
        if w.real > 0.5 * s.real:
            f = 2.0 * np.arctan(s / w) / s
        else:
            f = 2.0 * (0.5 * np.pi - np.arctan(w / s)) / s
    out[0] = f * x
    out[1] = f * y
    out[2] = f * z
    return out


@kernel
def rot_to_quat(R):
    """Float-only conversion (Shepperd); result has w >= 0."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    q = np.empty(4)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q[0] = 0.25 * s
        q[1] = (R[2, 1] - R[1, 2]) / s
        q[2] = (R[0, 2] - R[2, 0]) / s
        q[3] = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (R[0, 1] + R[1, 0]) / s
        q[3] = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q[0] = (R[0, 2] - R[2, 0]) / s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (R[1, 2] + R[2, 1]) / s
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q[0] = (R[1, 0] - R[0, 1]) / s
        q[1] = (R[0, 2] + R[2, 0]) / s
        q[2] = (R[1, 2] + R[2, 1]) / s
        q[3] = 0.25 * s
    n = np.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)
    q = q / n
    if q[0] < 0.0:
        q = -q
    return q


# --------------------------------------------------------------------------
# configuration manifold


@kernel
def config_integrate(tree, q, v, dt):
    jtype, parent, iq, iv = tree[0], tree[1], tree[2], tree[3]
    out = q.copy()
    for i in range(jtype.shape[0]):
        a = iq[i]
        b = iv[i]
        jt = jtype[i]
        if jt == FREE:
            for k in range(3):
                out[a + k] = q[a + k] + v[b + k] * dt
            dq = quat_exp(v[b + 3:b + 6] * dt)
            out[a + 3:a + 7] = quat_normalize(quat_mul(q[a + 3:a + 7], dq))
        elif jt == SPHERICAL:
            dq = quat_exp(v[b:b + 3] * dt)
            out[a:a + 4] = quat_normalize(quat_mul(q[a:a + 4], dq))
        else:
            out[a] = q[a] + v[b] * dt
    return out


@kernel
def config_difference(tree, q1, q2):
    """Tangent ``v`` with ``integrate(q1, v, 1) == q2``."""
    jtype, parent, iq, iv = tree[0], tree[1], tree[2], tree[3]
    nv = iv[-1] + NV_of(jtype[-1])
    out = np.full(nv, 0.0 * (q1[0] * q2[0]))
    for i in range(jtype.shape[0]):
        d = joint_difference(jtype[i], q1, q2, iq[i])
        for k in range(d.shape[0]):
            out[iv[i] + k] = d[k]
    return out


@kernel
def joint_difference(jt, q1, q2, a):
    """One joint's block of :func:`config_difference`; ``a`` is its offset in q."""
    z = 0.0 * (q1[a] * q2[a])
    if jt == FREE:
        out = np.full(6, z)
        for k in range(3):
            out[k] = q2[a + k] - q1[a + k]
        out[3:] = quat_log(quat_mul(quat_conj(q1[a + 3:a + 7]), q2[a + 3:a + 7]))
    elif jt == SPHERICAL:
        out = quat_log(quat_mul(quat_conj(q1[a:a + 4]), q2[a:a + 4]))
    else:
        out = np.full(1, z)
        out[0] = q2[a] - q1[a]
    return out


@kernel
def NV_of(jt):
    if jt == FREE:
        return 6
    if jt == SPHERICAL:
        return 3
    return 1


# --------------------------------------------------------------------------
# kinematics


@kernel
def _joint_local_into(tree, i, q, R, p):
    """Write joint ``i``'s placement in its parent frame into ``R``, ``p``."""
    jtype, iq, R0, t0, axis = tree[0], tree[2], tree[4], tree[5], tree[6]
    jt = jtype[i]
    a = iq[i]
    if jt == PRISMATIC:
        s = q[a]
        for r in range(3):
            for c in range(3):
                R[r, c] = R0[i, r, c] + 0.0 * s
        ax, ay, az = axis[i, 0] * s, axis[i, 1] * s, axis[i, 2] * s
        for r in range(3):
            p[r] = t0[i, r] + R0[i, r, 0] * ax + R0[i, r, 1] * ay + R0[i, r, 2] * az
        return
    b = a + 3 if jt == FREE else a
    w, x, y, z = q[b], q[b + 1], q[b + 2], q[b + 3]
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    for c in range(3):
        c0, c1, c2 = R[0, c], R[1, c], R[2, c]
        for r in range(3):
            R[r, c] = R0[i, r, 0] * c0 + R0[i, r, 1] * c1 + R0[i, r, 2] * c2
    if jt == FREE:
        tx, ty, tz = q[a], q[a + 1], q[a + 2]
        for r in range(3):
            p[r] = t0[i, r] + R0[i, r, 0] * tx + R0[i, r, 1] * ty + R0[i, r, 2] * tz
    else:
        for r in range(3):
            p[r] = t0[i, r] + 0.0 * w


@kernel
def joint_local(tree, i, q):
    """Placement of joint ``i``'s frame in its parent frame: (R, p)."""
    R = np.full((3, 3), 0.0 * q[0])
    p = np.full(3, 0.0 * q[0])
    _joint_local_into(tree, i, q, R, p)
    return R, p


@kernel
def _compose_into(Rp, pp, R, p, Rw, pw):
    """(Rw, pw) = (Rp, pp) * (R, p)."""
    for r in range(3):
        for c in range(3):
            Rw[r, c] = Rp[r, 0] * R[0, c] + Rp[r, 1] * R[1, c] + Rp[r, 2] * R[2, c]
        pw[r] = pp[r] + Rp[r, 0] * p[0] + Rp[r, 1] * p[1] + Rp[r, 2] * p[2]


@kernel
def forward_kinematics(tree, q):
    parent = tree[1]
    nj = parent.shape[0]
    z = 0.0 * q[0]
    Rl = np.full((nj, 3, 3), z)
    pl = np.full((nj, 3), z)
    Rw = np.full((nj, 3, 3), z)
    pw = np.full((nj, 3), z)
    for i in range(nj):
        _joint_local_into(tree, i, q, Rl[i], pl[i])
        par = parent[i]
        if par < 0:
            Rw[i] = Rl[i]
            pw[i] = pl[i]
        else:
            _compose_into(Rw[par], pw[par], Rl[i], pl[i], Rw[i], pw[i])
    return Rw, pw


@kernel
def _cross(ax, ay, az, bx, by, bz):
    return ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx


@kernel
def _motion_to_child_into(R, p, m, out):
    """out = X m with X the parent-to-child motion transform of (R, p)."""
    w0, w1, w2 = m[0], m[1], m[2]
    c0, c1, c2 = _cross(w0, w1, w2, p[0], p[1], p[2])
    v0, v1, v2 = m[3] + c0, m[4] + c1, m[5] + c2
    for r in range(3):
        out[r] = R[0, r] * w0 + R[1, r] * w1 + R[2, r] * w2
        out[3 + r] = R[0, r] * v0 + R[1, r] * v1 + R[2, r] * v2


@kernel
def forward_pass(tree, q, v, a, gravity):
    """Body-frame spatial velocities/accelerations of every joint frame.

    ``gravity`` enters as a fictitious world acceleration ``-g``; pass zeros
    to get true accelerations.  Returns (Rl, pl, Rw, pw, V, A).
    """
    jtype, parent, iv, axis = tree[0], tree[1], tree[3], tree[6]
    nj = parent.shape[0]
    z = 0.0 * (q[0] * v[0] * a[0])
    Rl = np.full((nj, 3, 3), z)
    pl = np.full((nj, 3), z)
    Rw = np.full((nj, 3, 3), z)
    pw = np.full((nj, 3), z)
    V = np.full((nj, 6), z)
    A = np.full((nj, 6), z)
    vJ = np.full(6, z)
    aJ = np.full(6, z)
    for i in range(nj):
        R = Rl[i]
        p = pl[i]
        _joint_local_into(tree, i, q, R, p)
        par = parent[i]
        Vi = V[i]
        Ai = A[i]
        if par < 0:
            Rw[i] = R
            pw[i] = p
            for r in range(3):
                Vi[r] = z
                Vi[3 + r] = z
                Ai[r] = z
                Ai[3 + r] = -(R[0, r] * gravity[0] + R[1, r] * gravity[1] + R[2, r] * gravity[2])
        else:
            _compose_into(Rw[par], pw[par], R, p, Rw[i], pw[i])
            _motion_to_child_into(R, p, V[par], Vi)
            _motion_to_child_into(R, p, A[par], Ai)
        # joint contribution, child coordinates
        jt = jtype[i]
        b = iv[i]
        for r in range(6):
            vJ[r] = z
            aJ[r] = z
        if jt == FREE:
            for r in range(3):
                vJ[r] = v[b + 3 + r]
                aJ[r] = a[b + 3 + r]
                vJ[3 + r] = R[0, r] * v[b] + R[1, r] * v[b + 1] + R[2, r] * v[b + 2]
                aJ[3 + r] = R[0, r] * a[b] + R[1, r] * a[b + 1] + R[2, r] * a[b + 2]
            c0, c1, c2 = _cross(vJ[0], vJ[1], vJ[2], vJ[3], vJ[4], vJ[5])
            aJ[3] -= c0
            aJ[4] -= c1
            aJ[5] -= c2
        elif jt == SPHERICAL:
            for r in range(3):
                vJ[r] = v[b + r]
                aJ[r] = a[b + r]
        else:
            for r in range(3):
                vJ[3 + r] = axis[i, r] * v[b]
                aJ[3 + r] = axis[i, r] * a[b]
        for r in range(6):
            Vi[r] += vJ[r]
        # A_i += aJ + V_i x vJ
        x0, x1, x2 = _cross(Vi[0], Vi[1], Vi[2], vJ[0], vJ[1], vJ[2])
        y0, y1, y2 = _cross(Vi[0], Vi[1], Vi[2], vJ[3], vJ[4], vJ[5])
        u0, u1, u2 = _cross(Vi[3], Vi[4], Vi[5], vJ[0], vJ[1], vJ[2])
        Ai[0] += aJ[0] + x0
        Ai[1] += aJ[1] + x1
        Ai[2] += aJ[2] + x2
        Ai[3] += aJ[3] + y0 + u0
        Ai[4] += aJ[4] + y1 + u1
        Ai[5] += aJ[5] + y2 + u2
    return Rl, pl, Rw, pw, V, A


@kernel
def rnea(tree, q, v, a, gravity, fext):
    """Generalized forces ``tau = M a + b - g - sum J^T fext``.

    ``fext[i]`` is a spatial force acting on body ``i``, world coordinates,
    moment taken about the world origin.
    """
    jtype, parent, iv, axis, I6 = tree[0], tree[1], tree[3], tree[6], tree[7]
    nj = parent.shape[0]
    Rl, pl, Rw, pw, V, A = forward_pass(tree, q, v, a, gravity)
    nv = iv[-1] + NV_of(jtype[-1])
    z = 0.0 * (V[0, 0] * fext[0, 0])
    F = np.full((nj, 6), z)
    h = np.full(6, z)
    for i in range(nj):
        I = I6[i]
        Vi = V[i]
        Ai = A[i]
        Fi = F[i]
        for r in range(6):
            sh = z
            sa = z
            for c in range(6):
                sh += I[r, c] * Vi[c]
                sa += I[r, c] * Ai[c]
            h[r] = sh
            Fi[r] = sa
        # V x* h
        a0, a1, a2 = _cross(Vi[0], Vi[1], Vi[2], h[0], h[1], h[2])
        b0, b1, b2 = _cross(Vi[3], Vi[4], Vi[5], h[3], h[4], h[5])
        c0, c1, c2 = _cross(Vi[0], Vi[1], Vi[2], h[3], h[4], h[5])
        # external force in body coordinates
        fo0, fo1, fo2 = fext[i, 3], fext[i, 4], fext[i, 5]
        m0, m1, m2 = _cross(pw[i, 0], pw[i, 1], pw[i, 2], fo0, fo1, fo2)
        n0, n1, n2 = fext[i, 0] - m0, fext[i, 1] - m1, fext[i, 2] - m2
        Rwi = Rw[i]
        for r in range(3):
            nb = Rwi[0, r] * n0 + Rwi[1, r] * n1 + Rwi[2, r] * n2
            fb = Rwi[0, r] * fo0 + Rwi[1, r] * fo1 + Rwi[2, r] * fo2
            Fi[r] -= nb
            Fi[3 + r] -= fb
        Fi[0] += a0 + b0
        Fi[1] += a1 + b1
        Fi[2] += a2 + b2
        Fi[3] += c0
        Fi[4] += c1
        Fi[5] += c2
    tau = np.full(nv, z)
    for i in range(nj - 1, -1, -1):
        b = iv[i]
        jt = jtype[i]
        Fi = F[i]
        R = Rl[i]
        if jt == FREE:
            for r in range(3):
                tau[b + r] = R[r, 0] * Fi[3] + R[r, 1] * Fi[4] + R[r, 2] * Fi[5]
                tau[b + 3 + r] = Fi[r]
        elif jt == SPHERICAL:
            for r in range(3):
                tau[b + r] = Fi[r]
        else:
            tau[b] = axis[i, 0] * Fi[3] + axis[i, 1] * Fi[4] + axis[i, 2] * Fi[5]
        par = parent[i]
        if par >= 0:
            p = pl[i]
            Fp = F[par]
            f0 = R[0, 0] * Fi[3] + R[0, 1] * Fi[4] + R[0, 2] * Fi[5]
            f1 = R[1, 0] * Fi[3] + R[1, 1] * Fi[4] + R[1, 2] * Fi[5]
            f2 = R[2, 0] * Fi[3] + R[2, 1] * Fi[4] + R[2, 2] * Fi[5]
            k0, k1, k2 = _cross(p[0], p[1], p[2], f0, f1, f2)
            for r in range(3):
                Fp[r] += R[r, 0] * Fi[0] + R[r, 1] * Fi[1] + R[r, 2] * Fi[2]
            Fp[0] += k0
            Fp[1] += k1
            Fp[2] += k2
            Fp[3] += f0
            Fp[4] += f1
            Fp[5] += f2
    return tau


@kernel
def motion_subspace(tree, i, R):
    """Motion subspace of joint ``i`` in its child coordinates (6 x nv_i)."""
    jt = tree[0][i]
    if jt == FREE:
        S = np.zeros((6, 6), dtype=R.dtype)
        for r in range(3):
            S[r, 3 + r] = 1.0
            for c in range(3):
                S[3 + r, c] = R[c, r]
    elif jt == SPHERICAL:
        S = np.zeros((6, 3), dtype=R.dtype)
        for r in range(3):
            S[r, r] = 1.0
    else:
        S = np.zeros((6, 1), dtype=R.dtype)
        ax = tree[6][i]
        for r in range(3):
            S[3 + r, 0] = ax[r]
    return S


@kernel
def motion_transform_matrix(R, p):
    """6x6 matrix mapping parent-coordinate motion to child coordinates."""
    X = np.zeros((6, 6), dtype=R.dtype)
    E = R.T
    px = np.zeros((3, 3), dtype=R.dtype)
    px[0, 1] = -p[2]
    px[0, 2] = p[1]
    px[1, 0] = p[2]
    px[1, 2] = -p[0]
    px[2, 0] = -p[1]
    px[2, 1] = p[0]
    Epx = mat3_mul(E, px)
    for r in range(3):
        for c in range(3):
            X[r, c] = E[r, c]
            X[3 + r, 3 + c] = E[r, c]
            X[3 + r, c] = -Epx[r, c]
    return X


@kernel
def crba(tree, q):
    """Joint-space mass matrix by the composite rigid-body algorithm."""
    jtype, parent, iv, I6 = tree[0], tree[1], tree[3], tree[7]
    nj = parent.shape[0]
    nv = iv[-1] + NV_of(jtype[-1])
    Ic = np.zeros((nj, 6, 6), dtype=q.dtype)
    Xs = np.zeros((nj, 6, 6), dtype=q.dtype)
    Rls = np.zeros((nj, 3, 3), dtype=q.dtype)
    for i in range(nj):
        R, p = joint_local(tree, i, q)
        Rls[i] = R
        Xs[i] = motion_transform_matrix(R, p)
        Ic[i] = I6[i] + 0.0 * q[0]
    for i in range(nj - 1, -1, -1):
        par = parent[i]
        if par >= 0:
            X = Xs[i]
            Ic[par] = Ic[par] + X.T @ Ic[i] @ X
    M = np.zeros((nv, nv), dtype=q.dtype)
    for i in range(nj):
        Si = motion_subspace(tree, i, Rls[i])
        F = Ic[i] @ Si
        bi = iv[i]
        ni = Si.shape[1]
        M[bi:bi + ni, bi:bi + ni] = Si.T @ F
        j = i
        while parent[j] >= 0:
            F = Xs[j].T @ F
            j = parent[j]
            Sj = motion_subspace(tree, j, Rls[j])
            bj = iv[j]
            nj_ = Sj.shape[1]
            blk = Sj.T @ F
            M[bj:bj + nj_, bi:bi + ni] = blk
            M[bi:bi + ni, bj:bj + nj_] = blk.T
    return M


@kernel
def point_jacobian(tree, q, body, point):
    """World-frame linear velocity Jacobian (3 x nv) of a world point rigidly
    attached to ``body``."""
    jtype, parent, iv = tree[0], tree[1], tree[3]
    nv = iv[-1] + NV_of(jtype[-1])
    Rw, pw = forward_kinematics(tree, q)
    J = np.full((3, nv), 0.0 * (q[0] * point[0]))
    j = body
    while j >= 0:
        par = parent[j]
        R, p = joint_local(tree, j, q)
        S = motion_subspace(tree, j, R)
        d = point - pw[j]
        b = iv[j]
        for c in range(S.shape[1]):
            ww = mat3_vec(Rw[j], S[0:3, c])
            vv = mat3_vec(Rw[j], S[3:6, c])
            J[:, b + c] = vv + cross3(ww, d)
        j = par
    return J


@kernel
def spatial_jacobian_world(tree, q, body):
    """Spatial Jacobian (6 x nv) of ``body``: world axes, about the world origin."""
    jtype, parent, iv = tree[0], tree[1], tree[3]
    nv = iv[-1] + NV_of(jtype[-1])
    Rw, pw = forward_kinematics(tree, q)
    J = np.zeros((6, nv), dtype=q.dtype)
    j = body
    while j >= 0:
        R, p = joint_local(tree, j, q)
        S = motion_subspace(tree, j, R)
        b = iv[j]
        for c in range(S.shape[1]):
            ww = mat3_vec(Rw[j], S[0:3, c])
            vv = mat3_vec(Rw[j], S[3:6, c])
            J[0:3, b + c] = ww
            J[3:6, b + c] = vv + cross3(pw[j], ww)
        j = parent[j]
    return J
