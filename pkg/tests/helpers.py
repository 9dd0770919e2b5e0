"""Shared test utilities: independent oracles kept deliberately separate
from the library code paths they check."""

import numpy as np

from fstheta import FeFunction, Mesh, ScalarField, StepRecord


def enumerate_edges(triangles):
    """Brute-force edge -> adjacent-triangle map (independent of the mesh
    module's facet construction)."""
    edges = {}
    for t, (a, b, c) in enumerate(np.asarray(triangles)):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(int(u), int(v)), max(int(u), int(v)))
            edges.setdefault(key, []).append(t)
    return edges


def eval_p1(mesh: Mesh, vertex_values, x, y):
    """Point evaluation of a P1 field on the structured mesh by barycentric
    coordinates (positive-slope diagonal convention)."""
    n = mesh.n_cells
    i = min(int(x * n), n - 1)
    j = min(int(y * n), n - 1)
    xi = x * n - i
    eta = y * n - j
    base = j * (n + 1) + i
    v00, v10 = vertex_values[base], vertex_values[base + 1]
    v01, v11 = vertex_values[base + n + 1], vertex_values[base + n + 2]
    if eta <= xi:   # lower triangle (v00, v10, v11)
        return (1.0 - xi) * v00 + (xi - eta) * v10 + eta * v11
    return (1.0 - eta) * v00 + (eta - xi) * v01 + xi * v11


def fe_as_field(fe: FeFunction) -> ScalarField:
    """Wrap an FE function as a ScalarField via pointwise P1 evaluation."""
    mesh = fe.mesh
    vv = fe.vertex_values()

    def fn(x, y, t):
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        ya = np.broadcast_to(np.asarray(y, dtype=float), xa.shape)
        out = np.empty(xa.shape)
        for idx in np.ndindex(xa.shape):
            out[idx] = eval_p1(mesh, vv, xa[idx], ya[idx])
        return out.reshape(np.shape(x)) if np.shape(x) else float(out[0])

    return ScalarField("fe", fn)


def synthetic_record(space, n, t_prev, t_new, states, laps=None, projs=None,
                     fqs=None) -> StepRecord:
    """StepRecord from prescribed endpoint data (interior substep slots
    reuse the endpoints; fine for quantities that ignore them)."""
    zero = space.function()
    laps = laps if laps is not None else (zero, zero)
    projs = projs if projs is not None else (zero, zero)
    fq = np.zeros_like(space.eval_q4(zero))
    fqs = fqs if fqs is not None else (fq, fq, fq, fq)
    return StepRecord(
        n=n, t_prev=t_prev, t_new=t_new,
        U_prev=states[0], U_theta=states[0], U_onemtheta=states[1],
        U_new=states[1],
        lap_prev=laps[0], lap_theta=laps[0], lap_onemtheta=laps[1],
        lap_new=laps[1],
        proj_f_prev=projs[0], proj_f_theta=projs[0],
        proj_f_onemtheta=projs[1], proj_f_new=projs[1],
        fq_prev=fqs[0], fq_theta=fqs[1], fq_onemtheta=fqs[2], fq_new=fqs[3],
    )


def scalar_substep_factor(lam, k, params):
    """Per-step amplification of the three-substep integrator applied to the
    scalar problem y' = -lam y (1-dof oracle)."""
    th, tt = params.theta, params.theta_tilde
    a1, b1 = params.alpha1, params.beta1
    r1 = (1.0 / (th * k) - b1 * lam) / (1.0 / (th * k) + a1 * lam)
    r2 = (1.0 / (tt * k) - a1 * lam) / (1.0 / (tt * k) + b1 * lam)
    r3 = (1.0 / (th * k) - b1 * lam) / (1.0 / (th * k) + a1 * lam)
    return r1 * r2 * r3


def sympy_local_matrices(coords):
    """Exact local P1 mass and stiffness matrices on one triangle by
    symbolic integration."""
    import sympy as sym

    x, y = sym.symbols("x y")
    (x0, y0), (x1, y1), (x2, y2) = [(sym.nsimplify(a), sym.nsimplify(b))
                                    for a, b in coords]
    area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    lams = []
    for (xa, ya), (xb, yb) in (((x1, y1), (x2, y2)),
                               ((x2, y2), (x0, y0)),
                               ((x0, y0), (x1, y1))):
        lams.append(((xb - xa) * (y - ya) - (yb - ya) * (x - xa)) / area2)
    # integrate over the triangle by mapping to the reference simplex
    s, t = sym.symbols("s t")
    xmap = x0 + (x1 - x0) * s + (x2 - x0) * t
    ymap = y0 + (y1 - y0) * s + (y2 - y0) * t
    jac = sym.Abs(area2)

    def integrate(expr):
        mapped = sym.expand(expr.subs({x: xmap, y: ymap})) * jac
        inner = sym.integrate(mapped, (s, 0, 1 - t))
        return sym.integrate(inner, (t, 0, 1))

    mass = np.empty((3, 3))
    stiff = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            mass[i, j] = float(integrate(lams[i] * lams[j]))
            gi = (sym.diff(lams[i], x), sym.diff(lams[i], y))
            gj = (sym.diff(lams[j], x), sym.diff(lams[j], y))
            stiff[i, j] = float(integrate(gi[0] * gj[0] + gi[1] * gj[1]))
    return mass, stiff
