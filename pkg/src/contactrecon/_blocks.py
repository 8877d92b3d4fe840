"""Compiled residual kernels for the discretized problem.

Each ``r_*`` kernel has the signature ``fun(params, xp, xc, g) -> r`` where
``xp``/``xc`` are the ambient per-frame variable vectors of the previous and
current frame and ``g`` is the ground plane ``(a, b)``.  They are generic in
dtype, so :func:`cs_jacobian` differentiates them by complex step.

Per-frame ambient layout (offsets in ``lay``)::

    qh | qo | vh | vo | c_obj | c_gnd | tau | lam | f_obj

``qo`` is the object's free base only; the head coordinate is fixed at the
handle length and the contact coordinates live in ``c_obj``.
"""
import numpy as np

from ._accel import kernel
from . import _kernels as K

# indices into the ``lay`` array
L_QH, L_QO, L_VH, L_VO, L_COBJ, L_CGND, L_TAU, L_LAM, L_FOBJ, L_NX = range(10)
L_NQH, L_NVH, L_KOBJ, L_NGND = range(10, 14)

CS_STEP = 1e-20


# --------------------------------------------------------------------------
# shared helpers


@kernel
def plane_frame(a):
    """Contact frame of a ground with unit normal ``a``: columns x, y=-a, z."""
    n = np.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
    y0, y1, y2 = -a[0] / n, -a[1] / n, -a[2] / n
    if 1.0 - abs(y0.real) < 1e-6:
        e0, e1, e2 = 0.0, 0.0, 1.0
    else:
        e0, e1, e2 = 1.0, 0.0, 0.0
    d = e0 * y0 + e1 * y1 + e2 * y2
    x0, x1, x2 = e0 - d * y0, e1 - d * y1, e2 - d * y2
    nx = np.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
    x0, x1, x2 = x0 / nx, x1 / nx, x2 / nx
    z0, z1, z2 = K._cross(x0, x1, x2, y0, y1, y2)
    R = np.full((3, 3), 0.0 * y0)
    R[0, 0], R[1, 0], R[2, 0] = x0, x1, x2
    R[0, 1], R[1, 1], R[2, 1] = y0, y1, y2
    R[0, 2], R[1, 2], R[2, 2] = z0, z1, z2
    return R


@kernel
def ground_point(g, c0, c1):
    """World point with in-plane coordinates (c0, c1) on plane ``g``."""
    R = plane_frame(g[0:3])
    n = np.sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
    b = g[3]
    p = np.full(3, 0.0 * (g[0] * c0))
    for r in range(3):
        p[r] = b * g[r] / n + R[r, 0] * c0 + R[r, 2] * c1
    return p


@kernel
def object_config(x, lay, L):
    k = lay[L_KOBJ]
    qo = np.full(8 + k, 0.0 * x[0])
    o = lay[L_QO]
    for i in range(7):
        qo[i] = x[o + i]
    qo[7] = L + 0.0 * x[0]
    oc = lay[L_COBJ]
    for i in range(k):
        qo[8 + i] = x[oc + i]
    return qo


@kernel
def object_tangent(x, lay, off):
    """Object tangent (base 6 from ``off``, zeros for prismatic joints)."""
    k = lay[L_KOBJ]
    v = np.full(7 + k, 0.0 * x[0])
    for i in range(6):
        v[i] = x[off + i]
    return v


@kernel
def cone3(mu):
    G = np.zeros((4, 3))
    s = np.sin(mu)
    c = np.cos(mu)
    G[0, 0], G[0, 1] = s, -c
    G[1, 0], G[1, 1] = -s, -c
    G[2, 1], G[2, 2] = -c, s
    G[3, 1], G[3, 2] = -c, -s
    return G


@kernel
def project(cam_R, cam_t, intr, p):
    """Pinhole projection; returns (u, v, z)."""
    x = cam_R[0, 0] * p[0] + cam_R[0, 1] * p[1] + cam_R[0, 2] * p[2] + cam_t[0]
    y = cam_R[1, 0] * p[0] + cam_R[1, 1] * p[1] + cam_R[1, 2] * p[2] + cam_t[1]
    z = cam_R[2, 0] * p[0] + cam_R[2, 1] * p[1] + cam_R[2, 2] * p[2] + cam_t[2]
    return intr[0] * x / z + intr[2], intr[1] * y / z + intr[3], z


@kernel
def huber_scale(s2, delta):
    """Factor k with (k r)^2 = 2 rho(|r|), i.e. robustified residual k*r."""
    if s2.real <= delta * delta:
        return 1.0 + 0.0 * s2
    s = np.sqrt(s2)
    return np.sqrt(2.0 * delta * (s - 0.5 * delta) / s2)


# --------------------------------------------------------------------------
# residual kernels


@kernel
def r_data(params, xp, xc, g):
    (htree, otree, lay, has_obj, L, mk_joint, mk_off, cam_R, cam_t, intr,
     meas, valid, sw, delta, zmin) = params
    nm = mk_joint.shape[0]
    npts = meas.shape[0]
    r = np.full(2 * npts, 0.0 * xc[0])
    qh = xc[lay[L_QH]:lay[L_QH] + lay[L_NQH]]
    Rw, pw = K.forward_kinematics(htree, qh)
    pts = np.full((npts, 3), 0.0 * xc[0])
    for m in range(nm):
        j = mk_joint[m]
        for a in range(3):
            pts[m, a] = pw[j, a] + Rw[j, a, 0] * mk_off[m, 0] + Rw[j, a, 1] * mk_off[m, 1] + Rw[j, a, 2] * mk_off[m, 2]
    if has_obj and npts > nm:
        qo = object_config(xc, lay, L)
        Ro, po = K.forward_kinematics(otree, qo)
        for e in range(npts - nm):
            pts[nm + e] = po[e]
    for m in range(npts):
        if valid[m] == 0:
            continue
        u, v, z = project(cam_R, cam_t, intr, pts[m])
        if z.real <= zmin:
            continue
        e0 = u - meas[m, 0]
        e1 = v - meas[m, 1]
        k = huber_scale(e0 * e0 + e1 * e1, delta) * sw
        r[2 * m] = k * e0
        r[2 * m + 1] = k * e1
    return r


@kernel
def spherical_log(x, o, qoffs):
    n = qoffs.shape[0]
    out = np.full(3 * n, 0.0 * x[0])
    for i in range(n):
        a = o + qoffs[i]
        w = K.quat_log(x[a:a + 4])
        out[3 * i] = w[0]
        out[3 * i + 1] = w[1]
        out[3 * i + 2] = w[2]
    return out


@kernel
def gmm_nll(y, means, Linv, logc):
    """Negative log-likelihood of ``y`` under a Gaussian mixture (log-sum-exp)."""
    M = means.shape[0]
    d = means.shape[1]
    e = np.full(M, 0.0 * y[0])
    tmp = np.full(d, 0.0 * y[0])
    for m in range(M):
        for i in range(d):
            tmp[i] = y[i] - means[m, i]
        ss = 0.0 * y[0]
        for i in range(d):
            acc = 0.0 * y[0]
            for j in range(i + 1):
                acc += Linv[m, i, j] * tmp[j]
            ss += acc * acc
        e[m] = logc[m] - 0.5 * ss
    emax = e[0]
    for m in range(1, M):
        if e[m].real > emax.real:
            emax = e[m]
    s = 0.0 * y[0]
    for m in range(M):
        s += np.exp(e[m] - emax)
    return -(emax + np.log(s))


@kernel
def r_prior(params, xp, xc, g):
    lay, qoffs, means, Linv, logc, floor, sw = params
    y = spherical_log(xc, lay[L_QH], qoffs)
    nll = gmm_nll(y, means, Linv, logc)
    r = np.full(1, 0.0 * xc[0])
    r[0] = sw * np.sqrt(nll - floor + 1e-12)
    return r


@kernel
def r_torque(params, xp, xc, g):
    lay, sw = params
    n = lay[L_NVH] - 6
    r = np.full(n, 0.0 * xc[0])
    o = lay[L_TAU]
    for i in range(n):
        r[i] = sw * xc[o + i]
    return r


@kernel
def _smooth_terms(tree, q, v, vprev, dt, sw, bodies, with_acc, r, off):
    n = bodies.shape[0]
    if with_acc:
        a = (v - vprev) / dt
    else:
        a = 0.0 * v
    Rl, pl, Rw, pw, V, A = K.forward_pass(tree, q, v, a, np.zeros(3))
    k = off
    for bi in range(n):
        b = bodies[bi]
        for c in range(6):
            r[k] = sw * V[b, c]
            k += 1
        if with_acc:
            for c in range(6):
                r[k] = sw * A[b, c]
                k += 1
    return k


@kernel
def r_smooth_h(params, xp, xc, g):
    htree, lay, bodies, dt, sw, with_acc = params
    n = bodies.shape[0]
    r = np.full(n * (12 if with_acc else 6), 0.0 * xc[0])
    nq, nv = lay[L_NQH], lay[L_NVH]
    q = xc[lay[L_QH]:lay[L_QH] + nq]
    v = xc[lay[L_VH]:lay[L_VH] + nv]
    vp = xp[lay[L_VH]:lay[L_VH] + nv]
    _smooth_terms(htree, q, v, vp, dt, sw, bodies, with_acc, r, 0)
    return r


@kernel
def r_smooth_o(params, xp, xc, g):
    otree, lay, L, bodies, dt, sw, with_acc = params
    n = bodies.shape[0]
    r = np.full(n * (12 if with_acc else 6), 0.0 * xc[0])
    q = object_config(xc, lay, L)
    v = object_tangent(xc, lay, lay[L_VO])
    vp = object_tangent(xp, lay, lay[L_VO])
    _smooth_terms(otree, q, v, vp, dt, sw, bodies, with_acc, r, 0)
    return r


@kernel
def r_velocity(params, xp, xc, g):
    htree, otree_base, lay, has_obj, dt, sw = params
    nq, nv = lay[L_NQH], lay[L_NVH]
    nvo = 6 if has_obj else 0
    r = np.full(nv + nvo, 0.0 * xc[0])
    d = K.config_difference(htree, xp[lay[L_QH]:lay[L_QH] + nq], xc[lay[L_QH]:lay[L_QH] + nq])
    o = lay[L_VH]
    for i in range(nv):
        r[i] = sw * (d[i] / dt - xc[o + i])
    if has_obj:
        do = K.config_difference(otree_base, xp[lay[L_QO]:lay[L_QO] + 7], xc[lay[L_QO]:lay[L_QO] + 7])
        o = lay[L_VO]
        for i in range(6):
            r[nv + i] = sw * (do[i] / dt - xc[o + i])
    return r


@kernel
def human_point(Rw, pw, joint, off):
    p = np.full(3, 0.0 * Rw[0, 0, 0])
    for a in range(3):
        p[a] = pw[joint, a] + Rw[joint, a, 0] * off[0] + Rw[joint, a, 1] * off[1] + Rw[joint, a, 2] * off[2]
    return p


@kernel
def r_kappa(params, xp, xc, g):
    """Contact motion residual for the contact points active in this frame.

    ``cinfo`` rows: (human joint, target, object body, coordinate index).
    Target 0 is the ground (coordinate index into c_gnd pairs), 1 the object.
    """
    htree, otree, lay, has_obj, L, cinfo, coff, sw = params
    n = cinfo.shape[0]
    r = np.full(3 * n, 0.0 * xc[0])
    qh = xc[lay[L_QH]:lay[L_QH] + lay[L_NQH]]
    Rw, pw = K.forward_kinematics(htree, qh)
    if has_obj:
        qo = object_config(xc, lay, L)
        Ro, po = K.forward_kinematics(otree, qo)
    else:
        po = np.full((1, 3), 0.0 * xc[0])
    for k in range(n):
        ph = human_point(Rw, pw, cinfo[k, 0], coff[k])
        if cinfo[k, 1] == 0:
            ci = lay[L_CGND] + 2 * cinfo[k, 3]
            pc = ground_point(g, xc[ci], xc[ci + 1])
        else:
            pc = po[cinfo[k, 2]]
        for a in range(3):
            r[3 * k + a] = sw * (ph[a] - pc[a])
    return r


@kernel
def r_contact_smooth(params, xp, xc, g):
    """Contact-coordinate velocity and force-rate residuals.

    ``cinfo`` rows: (target, coordinate index, with_force); ``wc``/``wf`` hold
    the square-rooted per-contact weights (already multiplied by dt).
    """
    lay, cinfo, wc, wf, mu, dt = params
    n = cinfo.shape[0]
    size = 0
    for k in range(n):
        nc = 2 if cinfo[k, 0] == 0 else 1
        nf = 3 if cinfo[k, 0] == 0 else 6
        size += nc
        if cinfo[k, 2]:
            size += nf
    r = np.full(size, 0.0 * xc[0])
    Gc = cone3(mu)
    j = 0
    for k in range(n):
        idx = cinfo[k, 1]
        if cinfo[k, 0] == 0:
            o = lay[L_CGND] + 2 * idx
            for a in range(2):
                r[j] = wc[k] * (xc[o + a] - xp[o + a]) / dt
                j += 1
            if cinfo[k, 2]:
                o = lay[L_LAM] + 4 * idx
                for a in range(3):
                    fc = 0.0 * xc[0]
                    fp = 0.0 * xc[0]
                    for m in range(4):
                        fc += Gc[m, a] * xc[o + m]
                        fp += Gc[m, a] * xp[o + m]
                    r[j] = wf[k] * (fc - fp) / dt
                    j += 1
        else:
            o = lay[L_COBJ] + idx
            r[j] = wc[k] * (xc[o] - xp[o]) / dt
            j += 1
            if cinfo[k, 2]:
                o = lay[L_FOBJ] + 6 * idx
                for a in range(6):
                    r[j] = wf[k] * (xc[o + a] - xp[o + a]) / dt
                    j += 1
    return r


@kernel
def human_external_forces(htree, Rw, pw, lay, xc, g, dinfo, doff, mu, Ro):
    """World spatial forces on human bodies from the frame's active contacts.

    ``dinfo`` rows: (human joint, target, coordinate index).
    """
    nj = htree[1].shape[0]
    fext = np.full((nj, 6), 0.0 * (xc[0] * Rw[0, 0, 0] * g[0]))
    Gc = cone3(mu)
    Rc = plane_frame(g[0:3])
    for k in range(dinfo.shape[0]):
        j = dinfo[k, 0]
        p = human_point(Rw, pw, j, doff[k])
        idx = dinfo[k, 2]
        if dinfo[k, 1] == 0:
            o = lay[L_LAM] + 4 * idx
            for a in range(3):
                fl = 0.0 * fext[0, 0]
                for m in range(4):
                    fl += Gc[m, a] * xc[o + m]
                # world force accumulates Rc * f_local
                for b in range(3):
                    fext[j, 3 + b] += Rc[b, a] * fl
                cx0, cx1, cx2 = K._cross(p[0], p[1], p[2], Rc[0, a] * fl, Rc[1, a] * fl, Rc[2, a] * fl)
                fext[j, 0] += cx0
                fext[j, 1] += cx1
                fext[j, 2] += cx2
        else:
            o = lay[L_FOBJ] + 6 * idx
            f0 = Ro[0, 0] * xc[o] + Ro[0, 1] * xc[o + 1] + Ro[0, 2] * xc[o + 2]
            f1 = Ro[1, 0] * xc[o] + Ro[1, 1] * xc[o + 1] + Ro[1, 2] * xc[o + 2]
            f2 = Ro[2, 0] * xc[o] + Ro[2, 1] * xc[o + 1] + Ro[2, 2] * xc[o + 2]
            m0 = Ro[0, 0] * xc[o + 3] + Ro[0, 1] * xc[o + 4] + Ro[0, 2] * xc[o + 5]
            m1 = Ro[1, 0] * xc[o + 3] + Ro[1, 1] * xc[o + 4] + Ro[1, 2] * xc[o + 5]
            m2 = Ro[2, 0] * xc[o + 3] + Ro[2, 1] * xc[o + 4] + Ro[2, 2] * xc[o + 5]
            cx0, cx1, cx2 = K._cross(p[0], p[1], p[2], f0, f1, f2)
            fext[j, 0] += m0 + cx0
            fext[j, 1] += m1 + cx1
            fext[j, 2] += m2 + cx2
            fext[j, 3] += f0
            fext[j, 4] += f1
            fext[j, 5] += f2
    return fext


@kernel
def r_dyn_h(params, xp, xc, g):
    htree, lay, has_obj, dinfo, doff, mu, gravity, dt, sw = params
    nq, nv = lay[L_NQH], lay[L_NVH]
    q = xc[lay[L_QH]:lay[L_QH] + nq]
    v = xc[lay[L_VH]:lay[L_VH] + nv]
    a = (v - xp[lay[L_VH]:lay[L_VH] + nv]) / dt
    Rw, pw = K.forward_kinematics(htree, q)
    if has_obj:
        o = lay[L_QO] + 3
        Ro = K.quat_to_rot(xc[o:o + 4])
    else:
        Ro = np.full((3, 3), 0.0 * xc[0])
    fext = human_external_forces(htree, Rw, pw, lay, xc, g, dinfo, doff, mu, Ro)
    tau = K.rnea(htree, q, v, a, gravity, fext)
    o = lay[L_TAU]
    r = np.full(nv, 0.0 * tau[0])
    for i in range(nv):
        r[i] = tau[i]
        if i >= 6:
            r[i] -= xc[o + i - 6]
        r[i] *= sw
    return r


@kernel
def object_external_forces(otree, Rw, pw, lay, xc, dinfo):
    """Reaction of the hand wrenches on the object's contact bodies.

    ``dinfo`` rows: (object body, coordinate index)."""
    nj = otree[1].shape[0]
    fext = np.full((nj, 6), 0.0 * (xc[0] * Rw[0, 0, 0]))
    R = Rw[0]
    for k in range(dinfo.shape[0]):
        j = dinfo[k, 0]
        o = lay[L_FOBJ] + 6 * dinfo[k, 1]
        p = pw[j]
        f0 = R[0, 0] * xc[o] + R[0, 1] * xc[o + 1] + R[0, 2] * xc[o + 2]
        f1 = R[1, 0] * xc[o] + R[1, 1] * xc[o + 1] + R[1, 2] * xc[o + 2]
        f2 = R[2, 0] * xc[o] + R[2, 1] * xc[o + 1] + R[2, 2] * xc[o + 2]
        m0 = R[0, 0] * xc[o + 3] + R[0, 1] * xc[o + 4] + R[0, 2] * xc[o + 5]
        m1 = R[1, 0] * xc[o + 3] + R[1, 1] * xc[o + 4] + R[1, 2] * xc[o + 5]
        m2 = R[2, 0] * xc[o + 3] + R[2, 1] * xc[o + 4] + R[2, 2] * xc[o + 5]
        cx0, cx1, cx2 = K._cross(p[0], p[1], p[2], f0, f1, f2)
        fext[j, 0] -= m0 + cx0
        fext[j, 1] -= m1 + cx1
        fext[j, 2] -= m2 + cx2
        fext[j, 3] -= f0
        fext[j, 4] -= f1
        fext[j, 5] -= f2
    return fext


@kernel
def r_dyn_o(params, xp, xc, g):
    otree, lay, L, dinfo, gravity, dt, sw = params
    q = object_config(xc, lay, L)
    v = object_tangent(xc, lay, lay[L_VO])
    a = (v - object_tangent(xp, lay, lay[L_VO])) / dt
    Rw, pw = K.forward_kinematics(otree, q)
    fext = object_external_forces(otree, Rw, pw, lay, xc, dinfo)
    tau = K.rnea(otree, q, v, a, gravity, fext)
    r = np.full(6, 0.0 * tau[0])
    for i in range(6):
        r[i] = sw * tau[i]
    return r


# --------------------------------------------------------------------------
# differentiation


@kernel
def _perturb(x, col, tkind, tamb, taxis, h, sign):
    """Apply a first-order tangent perturbation of size ``1j*h`` in place."""
    k = tkind[col]
    a = tamb[col]
    if k == 0:
        x[a] += sign * 1j * h
    else:
        # q <- q + (i h / 2) q (x) (0, e_axis)
        ax = taxis[col]
        w, x1, y1, z1 = x[a], x[a + 1], x[a + 2], x[a + 3]
        e = np.zeros(4, dtype=np.complex128)
        e[1 + ax] = 1.0
        d0 = -x1 * e[1] - y1 * e[2] - z1 * e[3]
        d1 = w * e[1] + y1 * e[3] - z1 * e[2]
        d2 = w * e[2] - x1 * e[3] + z1 * e[1]
        d3 = w * e[3] + x1 * e[2] - y1 * e[1]
        s = sign * 0.5j * h
        x[a] += s * d0
        x[a + 1] += s * d1
        x[a + 2] += s * d2
        x[a + 3] += s * d3


@kernel
def _cs_copies(xp, xc, g):
    return xp.astype(np.complex128), xc.astype(np.complex128), g.astype(np.complex128)


@kernel
def _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    """Reset the complex copies and perturb the ``j``-th requested column
    (previous frame, then current frame, then ground plane)."""
    for k in range(xp.shape[0]):
        xpc[k] = xp[k]
    for k in range(xc.shape[0]):
        xcc[k] = xc[k]
    for k in range(4):
        gc[k] = g[k]
    h = CS_STEP
    n_p, n_c = colsp.shape[0], colsc.shape[0]
    if j < n_p:
        _perturb(xpc, colsp[j], tkind, tamb, taxis, h, 1.0)
    elif j < n_p + n_c:
        _perturb(xcc, colsc[j - n_p], tkind, tamb, taxis, h, 1.0)
    else:
        c = colsg[j - n_p - n_c]
        if c < 2:
            for k in range(3):
                gc[k] += 1j * h * gbasis[c, k]
        else:
            gc[3] += 1j * h


@kernel
def _cs_store(J, j, r):
    for k in range(r.shape[0]):
        J[k, j] = r[k].imag / CS_STEP


def cs_jacobian(fun, params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    """Residual and complex-step Jacobian with respect to the given tangent
    columns of the previous frame, current frame and ground plane.

    Generic (uncompiled) driver; the solver uses the compiled ``jac_*``
    entry points below, which numba can cache because each names its
    residual as a global.
    """
    r0 = fun(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, fun(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_data(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_data(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_data(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_prior(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_prior(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_prior(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_torque(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_torque(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_torque(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_smooth_h(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    # the residual is linear in the previous velocity, which enters only
    # through a = (v - vp) / dt: its column is -1/dt times the body Jacobian
    # already sitting in the velocity rows of the matching v column
    htree, lay, bodies, dt, sw, with_acc = params
    r0 = r_smooth_h(params, xp, xc, g)
    n_p = colsp.shape[0]
    J = np.zeros((r0.shape[0], n_p + colsc.shape[0] + colsg.shape[0]))
    match = np.full(n_p, -1, np.int64)
    v0 = lay[L_VH]
    for j in range(n_p):
        if not v0 <= tamb[colsp[j]] < v0 + lay[L_NVH]:
            continue
        for k in range(colsc.shape[0]):
            if colsc[k] == colsp[j]:
                match[j] = n_p + k
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        if j < n_p and match[j] >= 0 and with_acc:
            continue
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_smooth_h(params, xpc, xcc, gc))
    if with_acc:
        for j in range(n_p):
            m = match[j]
            if m < 0:
                continue
            for bi in range(bodies.shape[0]):
                for c in range(6):
                    J[12 * bi + 6 + c, j] = -J[12 * bi + c, m] / dt
    return r0, J


@kernel
def jac_smooth_o(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_smooth_o(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_smooth_o(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_velocity(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    # current-frame velocity columns are the constant -sw identity, and a
    # human configuration column only moves the rows of its own joint
    htree, otree_base, lay, has_obj, dt, sw = params
    nv, nq, q0 = lay[L_NVH], lay[L_NQH], lay[L_QH]
    jtype, iq, iv = htree[0], htree[2], htree[3]
    owner = np.zeros(nq, np.int64)
    for i in range(jtype.shape[0]):
        stop = iq[i + 1] if i + 1 < jtype.shape[0] else nq
        owner[iq[i]:stop] = i
    r0 = r_velocity(params, xp, xc, g)
    n_p, n_c = colsp.shape[0], colsc.shape[0]
    J = np.zeros((r0.shape[0], n_p + n_c + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        a = -1
        if j < n_p:
            a = tamb[colsp[j]]
        elif j < n_p + n_c:
            a = tamb[colsc[j - n_p]]
            if lay[L_VH] <= a < lay[L_VH] + nv:
                J[a - lay[L_VH], j] = -sw
                continue
            if has_obj and lay[L_VO] <= a < lay[L_VO] + 6:
                J[nv + a - lay[L_VO], j] = -sw
                continue
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        if q0 <= a < q0 + nq:
            i = owner[a - q0]
            d = K.joint_difference(jtype[i], xpc[q0:q0 + nq], xcc[q0:q0 + nq], iq[i])
            for k in range(d.shape[0]):
                J[iv[i] + k, j] = sw * d[k].imag / (CS_STEP * dt)
            continue
        _cs_store(J, j, r_velocity(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_kappa(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_kappa(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_kappa(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_contact_smooth(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_contact_smooth(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_contact_smooth(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_dyn_h(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_dyn_h(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_dyn_h(params, xpc, xcc, gc))
    return r0, J


@kernel
def jac_dyn_o(params, xp, xc, g, colsp, colsc, colsg, tkind, tamb, taxis, gbasis):
    r0 = r_dyn_o(params, xp, xc, g)
    J = np.zeros((r0.shape[0], colsp.shape[0] + colsc.shape[0] + colsg.shape[0]))
    xpc, xcc, gc = _cs_copies(xp, xc, g)
    for j in range(J.shape[1]):
        _cs_column(j, xp, xc, g, xpc, xcc, gc, colsp, colsc, colsg, tkind, tamb, taxis, gbasis)
        _cs_store(J, j, r_dyn_o(params, xpc, xcc, gc))
    return r0, J


JACOBIANS = {
    r_data: jac_data,
    r_prior: jac_prior,
    r_torque: jac_torque,
    r_smooth_h: jac_smooth_h,
    r_smooth_o: jac_smooth_o,
    r_velocity: jac_velocity,
    r_kappa: jac_kappa,
    r_contact_smooth: jac_contact_smooth,
    r_dyn_h: jac_dyn_h,
    r_dyn_o: jac_dyn_o,
}


# --------------------------------------------------------------------------
# analytic control Jacobians (the dynamics residuals are linear in controls)


@kernel
def _wrench_columns(p, F, is_moment):
    w = np.zeros(6)
    if is_moment:
        for a in range(3):
            w[a] = F[a]
    else:
        c0, c1, c2 = K._cross(p[0], p[1], p[2], F[0], F[1], F[2])
        w[0], w[1], w[2] = c0, c1, c2
        for a in range(3):
            w[3 + a] = F[a]
    return w


@kernel
def dyn_h_controls(params, xc, g):
    """Jacobian of :func:`r_dyn_h` w.r.t. the frame's [tau | lam | f_obj]."""
    htree, lay, has_obj, dinfo, doff, mu, gravity, dt, sw = params
    nq, nv = lay[L_NQH], lay[L_NVH]
    ng, nk = lay[L_NGND], lay[L_KOBJ]
    nt = nv - 6
    J = np.zeros((nv, nt + 4 * ng + 6 * nk))
    for i in range(nt):
        J[6 + i, i] = -sw
    q = xc[lay[L_QH]:lay[L_QH] + nq]
    Rw, pw = K.forward_kinematics(htree, q)
    Rc = plane_frame(g[0:3])
    Gc = cone3(mu)
    Ro = np.eye(3)
    if has_obj:
        o = lay[L_QO] + 3
        Ro = K.quat_to_rot(xc[o:o + 4])
    F = np.zeros(3)
    for k in range(dinfo.shape[0]):
        j = dinfo[k, 0]
        idx = dinfo[k, 2]
        p = human_point(Rw, pw, j, doff[k])
        J6 = K.spatial_jacobian_world(htree, q, j)
        if dinfo[k, 1] == 0:
            for n in range(4):
                for a in range(3):
                    F[a] = Rc[a, 0] * Gc[n, 0] + Rc[a, 1] * Gc[n, 1] + Rc[a, 2] * Gc[n, 2]
                w = _wrench_columns(p, F, False)
                col = nt + 4 * idx + n
                for r in range(nv):
                    s = 0.0
                    for a in range(6):
                        s += J6[a, r] * w[a]
                    J[r, col] = -sw * s
        else:
            for e in range(6):
                for a in range(3):
                    F[a] = Ro[a, e % 3]
                w = _wrench_columns(p, F, e >= 3)
                col = nt + 4 * ng + 6 * idx + e
                for r in range(nv):
                    s = 0.0
                    for a in range(6):
                        s += J6[a, r] * w[a]
                    J[r, col] = -sw * s
    return J


@kernel
def dyn_o_controls(params, xc, g):
    """Jacobian of :func:`r_dyn_o` w.r.t. the frame's [tau | lam | f_obj]."""
    otree, lay, L, dinfo, gravity, dt, sw = params
    nv = lay[L_NVH]
    ng, nk = lay[L_NGND], lay[L_KOBJ]
    nt = nv - 6
    J = np.zeros((6, nt + 4 * ng + 6 * nk))
    q = object_config(xc, lay, L)
    Rw, pw = K.forward_kinematics(otree, q)
    F = np.zeros(3)
    for k in range(dinfo.shape[0]):
        j = dinfo[k, 0]
        idx = dinfo[k, 1]
        J6 = K.spatial_jacobian_world(otree, q, j)
        for e in range(6):
            for a in range(3):
                F[a] = Rw[0, a, e % 3]
            w = _wrench_columns(pw[j], F, e >= 3)
            col = nt + 4 * ng + 6 * idx + e
            for r in range(6):
                s = 0.0
                for a in range(6):
                    s += J6[a, r] * w[a]
                J[r, col] = sw * s
    return J
