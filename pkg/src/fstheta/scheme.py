"""Fractional-step theta time discretization of the heat equation.

Each time step t^{n-1} -> t^n runs three implicit substeps spanning the
fractions theta, 1 - 2*theta and theta of the step.  With
theta = 1 - sqrt(2)/2 the integrator is second-order accurate and strongly
A-stable for alpha1 > 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fem import FeFunction, P1Space, ScalarField
from .solver import SolverError, solve_spd

THETA_DEFAULT = 1.0 - math.sqrt(2.0) / 2.0


def glowinski_alpha(theta: float) -> float:
    """Splitting weight that makes all three substep matrices proportional."""
    return (1.0 - 2.0 * theta) / (1.0 - theta)


def make_uniform_grid(n_steps: int, final_time: float) -> np.ndarray:
    """Time grid t^n = n * T / N."""
    if n_steps < 1:
        raise ConfigurationError(f"need at least one step, got {n_steps}")
    if final_time <= 0.0:
        raise ConfigurationError(f"final time must be positive, got {final_time}")
    return np.arange(n_steps + 1) * (final_time / n_steps)


@dataclass
class SchemeParams:
    """Splitting weights and time grid of the three-substep integrator.

    ``alpha1``/``alpha2`` default to the proportional-matrices choice
    (1 - 2 theta) / (1 - theta); beta weights are the complements.
    """

    time_grid: np.ndarray
    theta: float = THETA_DEFAULT
    alpha1: float | None = None
    alpha2: float | None = None

    def __post_init__(self):
        self.time_grid = np.asarray(self.time_grid, dtype=float)
        if self.time_grid.ndim != 1 or self.time_grid.size < 2:
            raise ConfigurationError("time grid needs at least two nodes")
        if not np.all(np.diff(self.time_grid) > 0.0):
            raise ConfigurationError("time grid must be strictly increasing")
        if not 0.0 < self.theta < 1.0 / 3.0:
            raise ConfigurationError(
                f"theta must lie in (0, 1/3), got {self.theta!r}")
        if self.alpha1 is None:
            self.alpha1 = glowinski_alpha(self.theta)
        if self.alpha2 is None:
            self.alpha2 = glowinski_alpha(self.theta)
        if not 0.5 < self.alpha1 <= 1.0:
            raise ConfigurationError(
                f"alpha1 must lie in (1/2, 1], got {self.alpha1!r}")
        if not 0.0 < self.alpha2 < 1.0:
            raise ConfigurationError(
                f"alpha2 must lie in (0, 1), got {self.alpha2!r}")

    @property
    def theta_tilde(self) -> float:
        return 1.0 - 2.0 * self.theta

    @property
    def beta1(self) -> float:
        return 1.0 - self.alpha1

    @property
    def beta2(self) -> float:
        return 1.0 - self.alpha2

    @property
    def n_steps(self) -> int:
        return self.time_grid.size - 1

    @property
    def final_time(self) -> float:
        return float(self.time_grid[-1])

    def time(self, n: int) -> float:
        return float(self.time_grid[n])

    def step_size(self, n: int) -> float:
        if not 1 <= n <= self.n_steps:
            raise ValueError(f"step index {n} outside 1..{self.n_steps}")
        return float(self.time_grid[n] - self.time_grid[n - 1])

    def intermediate_times(self, n: int) -> tuple[float, float]:
        """The two interior substep times of step n."""
        t0 = self.time(n - 1)
        k = self.step_size(n)
        return t0 + self.theta * k, t0 + (self.theta + self.theta_tilde) * k


@dataclass
class StepRecord:
    """Everything one time step produces: the three substep states, their
    discrete Laplacians, projected forcing values, and cached forcing samples
    at the quadrature points (reused by the estimators)."""

    n: int
    t_prev: float
    t_new: float
    U_prev: FeFunction
    U_theta: FeFunction
    U_onemtheta: FeFunction
    U_new: FeFunction
    lap_prev: FeFunction
    lap_theta: FeFunction
    lap_onemtheta: FeFunction
    lap_new: FeFunction
    proj_f_prev: FeFunction
    proj_f_theta: FeFunction
    proj_f_onemtheta: FeFunction
    proj_f_new: FeFunction
    fq_prev: np.ndarray = field(repr=False, default=None)
    fq_theta: np.ndarray = field(repr=False, default=None)
    fq_onemtheta: np.ndarray = field(repr=False, default=None)
    fq_new: np.ndarray = field(repr=False, default=None)

    @property
    def k(self) -> float:
        return self.t_new - self.t_prev


class ThetaScheme:
    """Advance the discrete solution through the three substeps per step.

    Substep matrices are assembled once per distinct step size and reused;
    the time loop itself is sequential, but distinct runs sharing the same
    space are independent.
    """

    def __init__(self, space: P1Space, params: SchemeParams, forcing: ScalarField):
        self.space = space
        self.params = params
        self.forcing = forcing
        self._matrices: dict[float, tuple] = {}

    def _substep_matrices(self, k: float):
        cached = self._matrices.get(k)
        if cached is None:
            p = self.params
            M, K = self.space.mass, self.space.stiffness
            a_theta = (M * (1.0 / (p.theta * k)) + K * p.alpha1).tocsr()
            a_tilde = (M * (1.0 / (p.theta_tilde * k)) + K * p.beta1).tocsr()
            cached = (a_theta, a_tilde)
            self._matrices[k] = cached
        return cached

    def initial_state(self, u0: ScalarField | None = None) -> FeFunction:
        """L2 projection of the initial datum (zero field when omitted)."""
        if u0 is None:
            return self.space.function()
        return self.space.l2_project(u0, self.params.time(0))

    def advance(self, prev: FeFunction, n: int) -> StepRecord:
        """Solve the three substeps taking U^{n-1} to U^n and return the
        filled record."""
        return self._advance(prev, n, carry=None)

    def _advance(self, prev: FeFunction, n: int, carry):
        sp_, p = self.space, self.params
        if not 1 <= n <= p.n_steps:
            raise ValueError(f"step index {n} outside 1..{p.n_steps}")
        t0, t1 = p.time(n - 1), p.time(n)
        t_a, t_m = p.intermediate_times(n)
        k = t1 - t0
        a_theta, a_tilde = self._substep_matrices(k)
        M, K = sp_.mass, sp_.stiffness
        cfg = sp_.solver_config

        def _solve(matrix, rhs, tag):
            try:
                return solve_spd(matrix, rhs, cfg)
            except SolverError as err:
                raise SolverError(f"step {n}, {tag}: {err}",
                                  residual=err.residual,
                                  iterations=err.iterations) from err

        if carry is not None:
            fq0, lap0, pf0 = carry
        else:
            fq0 = sp_.eval_field_q4(self.forcing, t0)
            lap0 = sp_.function(_solve(M, K @ prev.coeffs, "laplacian at t^{n-1}"))
            pf0 = sp_.function(_solve(M, sp_.load_from_quad_values(fq0),
                                      "forcing projection at t^{n-1}"))
        fqa = sp_.eval_field_q4(self.forcing, t_a)
        fqm = sp_.eval_field_q4(self.forcing, t_m)
        fq1 = sp_.eval_field_q4(self.forcing, t1)
        b0 = sp_.load_from_quad_values(fq0)
        ba = sp_.load_from_quad_values(fqa)
        bm = sp_.load_from_quad_values(fqm)
        b1 = sp_.load_from_quad_values(fq1)

        al1, be1, al2, be2 = p.alpha1, p.beta1, p.alpha2, p.beta2
        rhs = (M @ prev.coeffs) / (p.theta * k) - be1 * (K @ prev.coeffs) \
            + al2 * ba + be2 * b0
        u_a = _solve(a_theta, rhs, "first substep")

        rhs = (M @ u_a) / (p.theta_tilde * k) - al1 * (K @ u_a) \
            + be2 * bm + al2 * ba
        u_m = _solve(a_tilde, rhs, "second substep")

        rhs = (M @ u_m) / (p.theta * k) - be1 * (K @ u_m) \
            + al2 * b1 + be2 * bm
        u_1 = _solve(a_theta, rhs, "third substep")

        lap_a = sp_.function(_solve(M, K @ u_a, "laplacian at t^{n-1+theta}"))
        lap_m = sp_.function(_solve(M, K @ u_m, "laplacian at t^{n-theta}"))
        lap_1 = sp_.function(_solve(M, K @ u_1, "laplacian at t^n"))
        pfa = sp_.function(_solve(M, ba, "forcing projection at t^{n-1+theta}"))
        pfm = sp_.function(_solve(M, bm, "forcing projection at t^{n-theta}"))
        pf1 = sp_.function(_solve(M, b1, "forcing projection at t^n"))

        return StepRecord(
            n=n, t_prev=t0, t_new=t1,
            U_prev=prev, U_theta=sp_.function(u_a),
            U_onemtheta=sp_.function(u_m), U_new=sp_.function(u_1),
            lap_prev=lap0, lap_theta=lap_a, lap_onemtheta=lap_m, lap_new=lap_1,
            proj_f_prev=pf0, proj_f_theta=pfa, proj_f_onemtheta=pfm,
            proj_f_new=pf1,
            fq_prev=fq0, fq_theta=fqa, fq_onemtheta=fqm, fq_new=fq1,
        )

    def iter_steps(self, U0: FeFunction):
        """Yield the N step records in order, reusing end-of-step caches."""
        state, carry = U0, None
        for n in range(1, self.params.n_steps + 1):
            rec = self._advance(state, n, carry)
            yield rec
            state = rec.U_new
            carry = (rec.fq_new, rec.lap_new, rec.proj_f_new)

    def run(self, U0: FeFunction) -> list[StepRecord]:
        """All step records; prefer :meth:`iter_steps` for long fine runs."""
        return list(self.iter_steps(U0))
