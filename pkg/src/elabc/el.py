"""Empirical likelihood on a matrix of summary differences.

Given rows ``h_i`` (one per simulated replicate) we look for probability
weights ``w`` on the simplex with ``sum_i w_i h_i = 0`` maximising
``prod_i m w_i``.  The problem is solved through its Lagrangian dual: the
weights are ``w_i = 1 / (m (1 + lam' h_i))`` where ``lam`` minimises the
convex function ``-sum_i log(1 + lam' h_i)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np

LOG_ZERO = -np.inf


class NonFiniteInput(ValueError):
    pass


class ELStatus(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    INFEASIBLE = "infeasible"


class Feasibility(enum.Enum):
    DEFINITELY_INFEASIBLE = "definitely_infeasible"
    MAYBE_FEASIBLE = "maybe_feasible"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 100
    weight_floor: float = 1e-12
    # iterates keep 1 + lam'h_i above domain_factor / m
    domain_factor: float = 0.5


@dataclass
class ELSolution:
    weights: np.ndarray
    multiplier: np.ndarray
    log_el: float
    status: ELStatus
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status is ELStatus.INTERIOR


def _as_matrix(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError(f"constraint matrix must be m x r with m, r >= 1, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise NonFiniteInput("constraint matrix contains NaN or infinite entries")
    return H


def quick_infeasibility_check(H) -> Feasibility:
    """Cheap necessary-condition screen for the origin lying in the hull of the rows.

    A column whose entries all share one strict sign keeps the origin out of
    the convex hull.  Passing the screen does not imply feasibility.
    """
    return _sign_screen(_as_matrix(H))


def _sign_screen(H: np.ndarray) -> Feasibility:
    if np.any(np.all(H > 0, axis=0) | np.all(H < 0, axis=0)):
        return Feasibility.DEFINITELY_INFEASIBLE
    return Feasibility.MAYBE_FEASIBLE


# Return codes of the jitted Newton loop.
_CONVERGED = 0
_NO_CONVERGENCE = 1
_LINE_SEARCH_FAILED = 2
_UNBOUNDED = 3


@numba.njit(cache=True)
def _dual_newton(H, tol, max_iter, domain_floor, unbounded_level):
    m, r = H.shape
    lam = np.zeros(r)
    z = np.ones(m)
    obj = 0.0
    grad = np.empty(r)
    hess = np.empty((r, r))
    polish = 0
    for it in range(max_iter):
        grad[:] = 0.0
        hess[:, :] = 0.0
        for i in range(m):
            zi = z[i]
            for a in range(r):
                ha = H[i, a] / zi
                grad[a] -= ha
                for b in range(a, r):
                    hess[a, b] += ha * H[i, b] / zi
        gmax = 0.0
        for a in range(r):
            for b in range(a):
                hess[a, b] = hess[b, a]
            if abs(grad[a]) > gmax:
                gmax = abs(grad[a])
        wsum = 0.0
        for i in range(m):
            wsum += 1.0 / (m * z[i])
        # a vanishing gradient with weights that do not sum to one means the
        # iterates are running off to infinity along an unbounded direction
        if gmax <= tol and abs(wsum - 1.0) <= 1e-11:
            # a couple of extra full steps drive the residual to rounding level
            polish += 1
            if polish > 2 or gmax == 0.0:
                return lam, z, _CONVERGED, it
        if r == 1:
            if hess[0, 0] <= 0.0:
                return lam, z, _LINE_SEARCH_FAILED, it
            step = np.empty(1)
            step[0] = -grad[0] / hess[0, 0]
        else:
            ridge = 0.0
            for a in range(r):
                ridge += hess[a, a]
            ridge *= 1e-14 / r
            if ridge == 0.0:
                ridge = 1.0
            for a in range(r):
                hess[a, a] += ridge
            step = -np.linalg.solve(hess, grad)
        slope = 0.0
        for a in range(r):
            slope += grad[a] * step[a]
        t = 1.0
        accepted = False
        z_new = np.empty(m)
        while t > 1e-14:
            ok = True
            obj_new = 0.0
            for i in range(m):
                s = 1.0
                for a in range(r):
                    s += (lam[a] + t * step[a]) * H[i, a]
                if s <= domain_floor:
                    ok = False
                    break
                z_new[i] = s
                obj_new -= np.log(s)
            if ok and obj_new <= obj + 1e-4 * t * slope + 1e-13 * (1.0 + abs(obj)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if polish > 0:
                return lam, z, _CONVERGED, it
            return lam, z, _LINE_SEARCH_FAILED, it
        for a in range(r):
            lam[a] += t * step[a]
        z[:] = z_new
        obj = obj_new
        if obj < unbounded_level:
            return lam, z, _UNBOUNDED, it
    return lam, z, _NO_CONVERGENCE, max_iter


def solve_el(H, opts: SolverOptions | None = None) -> ELSolution:
    """Maximise ``prod m w_i`` over simplex weights satisfying ``H' w = 0``.

    Interior solutions carry the dual weights and ``log_el = mean(log w)``;
    anything else carries ``log_el = LOG_ZERO``.
    """
    opts = opts or SolverOptions()
    H = _as_matrix(H)
    m, r = H.shape
    if _sign_screen(H) is Feasibility.DEFINITELY_INFEASIBLE:
        return ELSolution(np.zeros(m), np.full(r, np.nan), LOG_ZERO, ELStatus.INFEASIBLE)

    # The dual optimum equals sum log(m w_i); once the objective drops below
    # m log(m floor) some optimal weight must sit under the floor.
    unbounded_level = m * np.log(m * opts.weight_floor)
    # The weights do not depend on the column scale; unit-scaling the columns
    # keeps the Newton system away from underflow and overflow.
    col_scale = np.max(np.abs(H), axis=0)
    col_scale[col_scale == 0.0] = 1.0
    lam, z, code, iters = _dual_newton(
        H / col_scale, opts.tol, opts.max_iter, opts.domain_factor / m, unbounded_level
    )
    lam = lam / col_scale
    if code != _CONVERGED:
        return ELSolution(np.zeros(m), lam, LOG_ZERO, ELStatus.INFEASIBLE, iters)

    weights = 1.0 / (m * z)
    if weights.min() < opts.weight_floor:
        return ELSolution(weights, lam, LOG_ZERO, ELStatus.BOUNDARY, iters)
    return ELSolution(weights, lam, float(np.mean(np.log(weights))), ELStatus.INTERIOR, iters)


def log_el_scaled(H, opts: SolverOptions | None = None) -> float:
    """``(1/m) sum log w_i`` at the optimum, or ``LOG_ZERO``."""
    return solve_el(H, opts).log_el
