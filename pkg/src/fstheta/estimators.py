"""A posteriori error indicators for the fractional-step theta solver.

Per-step indicators (elliptic residual, time-reconstruction coefficients,
substep-defect corrections, data oscillation) feed an accumulator that
maintains the running estimator totals and the composite error bounds in
both reconstruction variants: "two-level" quantities use a single time
interval, "three-level" quantities a second difference over two adjacent
intervals (which only exists from the second step on; step one contributes
its two-level values instead).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .fem import FeFunction, P1Space, ScalarField
from .scheme import THETA_DEFAULT, SchemeParams, StepRecord

_SQRT30 = math.sqrt(30.0)
_GAUSS3_OFFSETS = (-math.sqrt(0.6), 0.0, math.sqrt(0.6))
_GAUSS3_WEIGHTS = (5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0)


@dataclass(frozen=True)
class ConstantsConfig:
    """Interpolation and regularity constants entering the indicators.

    Defaults are unit; sharper values only rescale magnitudes, never the
    convergence orders.
    """

    c1: float = 1.0     # H1 stability of the quasi-interpolant
    c11: float = 1.0    # first-order interpolation constant
    C11: float = 1.0    # companion constant in the time weight
    C12: float = 1.0    # regularity times second-order volume constant
    C22: float = 1.0    # regularity times second-order facet constant

    def __post_init__(self):
        for name in ("c1", "c11", "C11", "C12", "C22"):
            if getattr(self, name) <= 0.0:
                raise ConfigurationError(f"constant {name} must be positive")


def quadrature_exactness_check(alpha: float, theta: float = THETA_DEFAULT) -> float:
    """Max defect of the scheme's nodal time quadrature on {1, s}.

    The rule places weights (beta*theta, alpha*(1-theta), beta*(1-theta),
    alpha*theta) at abscissae (0, theta, 1-theta, 1); it integrates linear
    polynomials exactly iff alpha = 1/2 or theta = 1 - sqrt(2)/2.
    """
    beta = 1.0 - alpha
    tt = 1.0 - theta
    nodes = (0.0, theta, 1.0 - theta, 1.0)
    weights = (beta * theta, alpha * tt, beta * tt, alpha * theta)
    defect_const = abs(math.fsum(weights) - 1.0)
    defect_lin = abs(math.fsum(w * s for w, s in zip(weights, nodes)) - 0.5)
    return max(defect_const, defect_lin)


def correction_coeffs(theta: float, alpha: float) -> tuple[float, float, float, float]:
    """Weights (c0, c1, ca, cm) of the substep-defect corrections: the
    correction equals c0*v(t^{n-1}) + c1*v(t^n) - ca*v(t^{n-1+theta})
    - cm*v(t^{n-theta})."""
    beta = 1.0 - alpha
    tt = 1.0 - theta
    return (tt * (alpha * (1.0 - theta) + beta * theta),
            tt * (alpha * theta + beta * (1.0 - theta)),
            tt * alpha,
            tt * beta)


# ---------------------------------------------------------------------------
# per-step fields


def lap_time_interpolant(rec: StepRecord, t: float) -> FeFunction:
    """Linear-in-time interpolant of the endpoint discrete Laplacians."""
    l1 = (t - rec.t_prev) / rec.k
    return (1.0 - l1) * rec.lap_prev + l1 * rec.lap_new


def lap_substep_defect(rec: StepRecord, params: SchemeParams) -> FeFunction:
    """Correction measuring how far the interior substep Laplacians sit from
    the endpoint interpolant (weights alpha1/beta1)."""
    c0, c1, ca, cm = correction_coeffs(params.theta, params.alpha1)
    return (c0 * rec.lap_prev + c1 * rec.lap_new
            - ca * rec.lap_theta - cm * rec.lap_onemtheta)


def forcing_interpolant(params: SchemeParams, n: int, f: ScalarField) -> ScalarField:
    """Linear-in-time interpolant of the forcing between t^{n-1} and t^n."""
    t0, t1 = params.time(n - 1), params.time(n)
    k = t1 - t0

    def fn(x, y, t):
        l1 = (t - t0) / k
        return (1.0 - l1) * f(x, y, t0) + l1 * f(x, y, t1)

    return ScalarField(f"interp[{f.name}]", fn)


def forcing_substep_defect(params: SchemeParams, n: int, f: ScalarField) -> ScalarField:
    """Correction measuring the interpolation defect of the forcing at the
    interior substep times (weights alpha2/beta2); constant in t."""
    t0, t1 = params.time(n - 1), params.time(n)
    t_a, t_m = params.intermediate_times(n)
    c0, c1, ca, cm = correction_coeffs(params.theta, params.alpha2)

    def fn(x, y, t):
        return (c0 * f(x, y, t0) + c1 * f(x, y, t1)
                - ca * f(x, y, t_a) - cm * f(x, y, t_m))

    return ScalarField(f"defect[{f.name}]", fn)


def corrected_forcing_interpolant(params: SchemeParams, n: int,
                                  f: ScalarField) -> ScalarField:
    """Forcing interpolant minus its substep-defect correction."""
    phi = forcing_interpolant(params, n, f)
    xi = forcing_substep_defect(params, n, f)

    def fn(x, y, t):
        return phi(x, y, t) - xi(x, y, t)

    return ScalarField(f"corrected[{f.name}]", fn)


def recon_coeff_two_level(rec: StepRecord) -> FeFunction:
    """Quadratic coefficient of the single-interval time reconstruction:
    slope of the discrete Laplacian minus slope of the projected forcing."""
    return ((rec.lap_new - rec.lap_prev)
            - (rec.proj_f_new - rec.proj_f_prev)) / rec.k


def recon_coeff_three_level(rec: StepRecord, prev_rec: StepRecord):
    """Quadratic coefficient of the two-interval reconstruction plus its
    companion second differences.

    Returns (coeff, lap_second_diff, forcing_second_diff): the backward
    second difference of the states, and the matching second differences of
    the discrete Laplacians and projected forcing values.
    """
    if prev_rec is None or rec.n < 2:
        raise ValueError("two-interval reconstruction needs step n >= 2")
    if prev_rec.n != rec.n - 1:
        raise ValueError(
            f"records out of order: got steps {prev_rec.n} and {rec.n}")
    k, k_prev = rec.k, prev_rec.k
    coeff = (-2.0 / (k + k_prev)) * (
        (rec.U_new - rec.U_prev) / k - (prev_rec.U_new - prev_rec.U_prev) / k_prev)
    r = k_prev / k
    lap_dd = 0.5 * (r * rec.lap_new - (1.0 + r) * rec.lap_prev + prev_rec.lap_prev)
    f_dd = 0.5 * (r * rec.proj_f_new - (1.0 + r) * rec.proj_f_prev
                  + prev_rec.proj_f_prev)
    return coeff, lap_dd, f_dd


# ---------------------------------------------------------------------------
# per-step scalar indicators


def elliptic_estimator(space: P1Space, v: FeFunction, consts: ConstantsConfig,
                       lap: FeFunction | None = None) -> float:
    """Residual bound for the distance between v and its elliptic lift:
    C12 ||h^2 lap(v)|| + C22 ||h^{3/2} J[grad v]||."""
    if lap is None:
        lap = space.discrete_laplacian(v)
    return (consts.C12 * space.weighted_element_norm(lap, 2.0)
            + consts.C22 * space.jump_norm(v, 1.5))


def time_weight(space: P1Space, w: FeFunction, k: float, consts: ConstantsConfig,
                lap: FeFunction | None = None) -> float:
    """Weight of one step in the quadratic-reconstruction time estimator:
    (k^2/sqrt(30)) (c1 |w|_1 + C11 ||h lap(w)||)."""
    if lap is None:
        lap = space.discrete_laplacian(w)
    return (k * k / _SQRT30) * (consts.c1 * space.h1_seminorm(w)
                                + consts.C11 * space.weighted_element_norm(lap, 1.0))


def step_difference_estimator(space: P1Space, rec: StepRecord,
                              consts: ConstantsConfig) -> float:
    """Spatial indicator of the per-step solution change:
    C12 ||h^2 (lap^n - lap^{n-1})/k|| + C22 ||h^{3/2} J[grad(U^n - U^{n-1})]||
    (the jump term deliberately carries no 1/k)."""
    vol = space.weighted_element_norm((rec.lap_new - rec.lap_prev) / rec.k, 2.0)
    jump = space.jump_norm(rec.U_new - rec.U_prev, 1.5)
    return consts.C12 * vol + consts.C22 * jump


def coarsening_estimator(space: P1Space, rec: StepRecord, transfer=None) -> float:
    """Norm of (T - I) applied to -lap^{n-1} + U^{n-1}/k for a transfer
    operator T between consecutive spaces; exactly zero for the identity
    transfer used on a fixed mesh."""
    if transfer is None:
        return 0.0
    g = rec.U_prev / rec.k - rec.lap_prev
    return space.l2_norm(transfer(g) - g)


# ---------------------------------------------------------------------------
# per-step bundle


@dataclass
class StepEstimates:
    """All scalar indicators of one step; *_two/_three distinguish the
    reconstruction variants (identical at n = 1)."""

    n: int
    k: float
    k_prev: float
    eta_U: float
    gamma_two: float
    gamma_three: float
    eta_w_two: float
    eta_w_three: float
    norm_w_two: float
    norm_w_three: float
    norm_xi_theta: float
    norm_xi_theta_prev: float
    delta: float
    beta_coarsen: float
    zeta1: float
    zeta2: float
    norm_xi_phi: float
    norm_proj_xi_phi: float
    norm_proj_xi_phi_prev: float
    z_norm: float
    y_norm: float
    compact_residual: float


class EstimatorEngine:
    """Evaluates every per-step indicator for one run.

    Stateless apart from a small memo of previous-step correction norms, so
    steps of a fixed trajectory may be processed in any order (the memo is
    just a shortcut for the sequential case).
    """

    def __init__(self, space: P1Space, params: SchemeParams, forcing: ScalarField,
                 consts: ConstantsConfig | None = None, transfer=None):
        self.space = space
        self.params = params
        self.forcing = forcing
        self.consts = consts or ConstantsConfig()
        self.transfer = transfer
        self._memo: dict[int, tuple[float, float]] = {}

    # -- forcing corrections -------------------------------------------------

    def xi_phi_quad_values(self, rec: StepRecord) -> np.ndarray:
        """Substep-defect correction of the forcing at the quadrature points."""
        c0, c1, ca, cm = correction_coeffs(self.params.theta, self.params.alpha2)
        return (c0 * rec.fq_prev + c1 * rec.fq_new
                - ca * rec.fq_theta - cm * rec.fq_onemtheta)

    def data_time_error(self, rec: StepRecord) -> float:
        """Mean interpolation error of the forcing over the step,
        (1/k) int ||f(s) - interp(s)|| ds by three-point Gauss in time."""
        t_mid = 0.5 * (rec.t_prev + rec.t_new)
        half = 0.5 * rec.k
        acc = 0.0
        for off, wq in zip(_GAUSS3_OFFSETS, _GAUSS3_WEIGHTS):
            s = t_mid + half * off
            l1 = (s - rec.t_prev) / rec.k
            phi_vals = (1.0 - l1) * rec.fq_prev + l1 * rec.fq_new
            f_vals = self.space.eval_field_q4(self.forcing, s)
            acc += wq * self.space.quad_norm(f_vals - phi_vals)
        return 0.5 * acc

    def data_projection_error(self, rec: StepRecord, xi_vals: np.ndarray,
                              proj_xi: FeFunction) -> float:
        """c11 max over the endpoint forcings of ||h (I - P0)(f + xi)||."""
        sp_ = self.space
        fe_prev = sp_.eval_q4(rec.proj_f_prev + proj_xi)
        d_prev = sp_.weighted_quad_norm(rec.fq_prev + xi_vals - fe_prev, 1.0)
        fe_new = sp_.eval_q4(rec.proj_f_new + proj_xi)
        d_new = sp_.weighted_quad_norm(rec.fq_new + xi_vals - fe_new, 1.0)
        return self.consts.c11 * max(d_prev, d_new)

    # -- consistency check ----------------------------------------------------

    def compact_form_residual(self, rec: StepRecord,
                              xi_theta: FeFunction | None = None,
                              proj_xi_phi: FeFunction | None = None) -> float:
        """Relative residual of the single-equation form of the step:
        (U^n - U^{n-1})/k + corrected-midpoint Laplacian - projected
        corrected forcing.  Vanishes to solver tolerance when the substep
        algebra and the corrections are consistent."""
        sp_ = self.space
        if xi_theta is None:
            xi_theta = lap_substep_defect(rec, self.params)
        if proj_xi_phi is None:
            proj_xi_phi = sp_.project_quad_values(self.xi_phi_quad_values(rec))
        slope = (rec.U_new - rec.U_prev) / rec.k
        theta_hat = 0.5 * (rec.lap_prev + rec.lap_new) - xi_theta
        phi_hat = 0.5 * (rec.proj_f_prev + rec.proj_f_new) - proj_xi_phi
        resid = slope + theta_hat - phi_hat
        scale = max(sp_.l2_norm(slope), sp_.l2_norm(theta_hat),
                    sp_.l2_norm(phi_hat))
        if scale == 0.0:
            return 0.0
        return sp_.l2_norm(resid) / scale

    # -- the full per-step bundle ----------------------------------------------

    def step_estimates(self, rec: StepRecord,
                       prev_rec: StepRecord | None = None) -> StepEstimates:
        sp_, p, cs = self.space, self.params, self.consts
        k = rec.k
        k_prev = prev_rec.k if prev_rec is not None else 0.0

        xi_t = lap_substep_defect(rec, p)
        norm_xi_t = sp_.l2_norm(xi_t)
        xi_vals = self.xi_phi_quad_values(rec)
        norm_xi_phi = sp_.quad_norm(xi_vals)
        proj_xi = sp_.project_quad_values(xi_vals)
        norm_proj_xi = sp_.l2_norm(proj_xi)

        w = recon_coeff_two_level(rec)
        lap_w = sp_.discrete_laplacian(w)
        gamma2 = time_weight(sp_, w, k, cs, lap=lap_w)
        eta_w2 = elliptic_estimator(sp_, w, cs, lap=lap_w)
        norm_w2 = sp_.l2_norm(w)

        eta_u = elliptic_estimator(sp_, rec.U_new, cs, lap=rec.lap_new)
        delta = step_difference_estimator(sp_, rec, cs)
        beta = coarsening_estimator(sp_, rec, self.transfer)
        zeta1 = self.data_time_error(rec)
        zeta2 = self.data_projection_error(rec, xi_vals, proj_xi)

        if prev_rec is not None:
            wt, lap_dd, f_dd = recon_coeff_three_level(rec, prev_rec)
            lap_wt = sp_.discrete_laplacian(wt)
            gamma3 = time_weight(sp_, wt, k, cs, lap=lap_wt)
            eta_w3 = elliptic_estimator(sp_, wt, cs, lap=lap_wt)
            norm_w3 = sp_.l2_norm(wt)
            z_norm = sp_.l2_norm(lap_dd)
            y_norm = sp_.l2_norm(f_dd)
            norm_xi_t_prev, norm_proj_xi_prev = self._prev_norms(prev_rec)
        else:
            gamma3, eta_w3, norm_w3 = gamma2, eta_w2, norm_w2
            z_norm = y_norm = 0.0
            norm_xi_t_prev = norm_proj_xi_prev = 0.0

        compact = self.compact_form_residual(rec, xi_theta=xi_t,
                                             proj_xi_phi=proj_xi)
        self._memo[rec.n] = (norm_xi_t, norm_proj_xi)
        for stale in [m for m in self._memo if m < rec.n - 1]:
            del self._memo[stale]

        return StepEstimates(
            n=rec.n, k=k, k_prev=k_prev,
            eta_U=eta_u,
            gamma_two=gamma2, gamma_three=gamma3,
            eta_w_two=eta_w2, eta_w_three=eta_w3,
            norm_w_two=norm_w2, norm_w_three=norm_w3,
            norm_xi_theta=norm_xi_t, norm_xi_theta_prev=norm_xi_t_prev,
            delta=delta, beta_coarsen=beta,
            zeta1=zeta1, zeta2=zeta2,
            norm_xi_phi=norm_xi_phi,
            norm_proj_xi_phi=norm_proj_xi,
            norm_proj_xi_phi_prev=norm_proj_xi_prev,
            z_norm=z_norm, y_norm=y_norm,
            compact_residual=compact,
        )

    def _prev_norms(self, prev_rec: StepRecord) -> tuple[float, float]:
        memo = self._memo.get(prev_rec.n)
        if memo is not None:
            return memo
        xi_t = lap_substep_defect(prev_rec, self.params)
        proj_xi = self.space.project_quad_values(self.xi_phi_quad_values(prev_rec))
        return self.space.l2_norm(xi_t), self.space.l2_norm(proj_xi)


# ---------------------------------------------------------------------------
# accumulation

REPORT_COLUMNS = (
    "m", "t_m",
    "E_T1_two", "E_T1_three", "E_T2", "E_T3",
    "E_S1_two", "E_S1_three", "E_S2", "E_C", "E_D1", "E_D2",
    "E_ell", "E_rec_two", "E_rec_three", "E_m1",
    "total_two", "total_three", "bound_two", "bound_three",
)


@dataclass
class EstimatorReport:
    """Running estimator values, one row per completed step."""

    columns: tuple[str, ...]
    rows: list[tuple]

    def series(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])

    def final(self, name: str) -> float:
        if not self.rows:
            raise ValueError("report is empty")
        return self.rows[-1][self.columns.index(name)]

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([f"{v:.10e}" if isinstance(v, float) else v
                                 for v in row])


class EstimatorAccumulator:
    """Folds per-step estimates into the running totals and bounds.

    ``initial_elliptic`` seeds the elliptic maximum with the indicator of
    the initial state; ``rho0`` is a bound on the initial reconstruction
    error entering the composite bounds with factor sqrt(2).
    """

    def __init__(self, params: SchemeParams, initial_elliptic: float = 0.0,
                 rho0: float = 0.0):
        self.params = params
        self.rho0 = rho0
        self._n = 0
        self._sum_kg2_two = 0.0
        self._sum_kg2_three = 0.0
        self._e_t2 = 0.0
        self._e_t3 = 0.0
        self._e_s1_two = 0.0
        self._e_s1_three = 0.0
        self._e_s2 = 0.0
        self._e_c = 0.0
        self._e_d1 = 0.0
        self._e_d2 = 0.0
        self._e_ell = initial_elliptic
        self._e_rec_two = 0.0
        self._e_rec_three = 0.0
        self._e_m1 = 0.0
        self.rows: list[tuple] = []

    def add(self, se: StepEstimates) -> None:
        if se.n != self._n + 1:
            raise ValueError(
                f"steps must be accumulated in order: expected {self._n + 1}, "
                f"got {se.n}")
        self._n = se.n
        k = se.k

        self._sum_kg2_two += k * se.gamma_two ** 2
        self._sum_kg2_three += k * se.gamma_three ** 2
        self._e_t2 += 2.0 * k * se.norm_xi_theta
        self._e_s1_two += 0.5 * k * k * se.eta_w_two
        self._e_s1_three += 0.5 * k * k * se.eta_w_three
        self._e_s2 += 2.0 * k * se.delta
        self._e_c += 2.0 * k * se.beta_coarsen
        self._e_d1 += 2.0 * k * (se.zeta1 + se.norm_xi_phi)
        self._e_d2 += math.sqrt(k) * se.zeta2
        self._e_ell = max(self._e_ell, se.eta_U)
        self._e_rec_two = max(self._e_rec_two,
                              k * k / 8.0 * (se.eta_w_two + se.norm_w_two))
        self._e_rec_three = max(self._e_rec_three,
                                k * k / 8.0 * (se.eta_w_three + se.norm_w_three))
        if se.n >= 2:
            self._e_t3 += k * k / (2.0 * (k + se.k_prev)) * se.z_norm
            self._e_m1 += k * (
                k / (2.0 * (k + se.k_prev)) * se.y_norm
                + 0.25 * k * (se.norm_xi_theta + se.norm_xi_theta_prev)
                + 0.25 * k * (se.norm_proj_xi_phi + se.norm_proj_xi_phi_prev))

        e_t1_two = math.sqrt(self._sum_kg2_two)
        e_t1_three = math.sqrt(self._sum_kg2_three)
        total_two = (e_t1_two + self._e_t2 + self._e_s1_two + self._e_s2
                     + self._e_ell + self._e_rec_two)
        total_three = (e_t1_three + self._e_t2 + self._e_t3 + self._e_s1_three
                       + self._e_s2 + self._e_ell + self._e_rec_three)
        bound_two = (math.sqrt(2.0) * self.rho0 + e_t1_two
                     + math.hypot(self._e_t2 + self._e_s1_two + self._e_s2
                                  + self._e_c + self._e_d1, self._e_d2)
                     + self._e_rec_two + self._e_ell)
        bound_three = (math.sqrt(2.0) * self.rho0 + e_t1_three
                       + math.hypot(self._e_t2 + self._e_t3 + self._e_s1_three
                                    + self._e_s2 + self._e_c + self._e_d1
                                    + self._e_m1, self._e_d2)
                       + self._e_rec_three + self._e_ell)

        self.rows.append((
            se.n, self.params.time(se.n),
            e_t1_two, e_t1_three, self._e_t2, self._e_t3,
            self._e_s1_two, self._e_s1_three, self._e_s2, self._e_c,
            self._e_d1, self._e_d2,
            self._e_ell, self._e_rec_two, self._e_rec_three, self._e_m1,
            total_two, total_three, bound_two, bound_three,
        ))

    def report(self) -> EstimatorReport:
        return EstimatorReport(REPORT_COLUMNS, list(self.rows))
