"""Minimisation of the empirical exponential objective at one time step.

For coefficients ``c`` of shape (d, R) the objective is

    Psi(c) = mean_i exp(-gamma * sum_{j,r} c[j, r] f[i, r] x[i, j] + carry[i])

with ``x = increments / scale``. It is a positive combination of exponentials
of affine functions of ``c``, hence convex; its log is convex too and is what
the Newton iteration works on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, ObjectiveOverflow

logger = logging.getLogger(__name__)

CONVERGED = "Converged"
MAX_ITER = "MaxIter"
UNBOUNDED = "Unbounded"
REGULARIZED = "Regularized"

_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class ObjectiveData:
    """Per-step inputs: features (N, R), increments (N, d), carry (N,).

    ``scale`` (N, d) divides the increments; the learner passes the
    pre-step prices so that coefficients are dollar allocations.
    """

    features: np.ndarray
    increments: np.ndarray
    carry: np.ndarray
    gamma: float = 1.0
    scale: np.ndarray | None = None
    design: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        dS = np.asarray(self.increments, dtype=float)
        if dS.ndim == 1:
            dS = dS[:, None]
        carry = np.asarray(self.carry, dtype=float)
        if carry.ndim == 0:
            carry = np.full(f.shape[0], float(carry))
        n = f.shape[0]
        if dS.shape[0] != n or carry.shape != (n,):
            raise InvalidInput(
                f"shape mismatch: features {f.shape}, increments {dS.shape}, carry {carry.shape}"
            )
        x = dS
        if self.scale is not None:
            scale = np.asarray(self.scale, dtype=float)
            if scale.ndim == 1 and scale.size == dS.shape[0] != dS.shape[1]:
                scale = scale[:, None]
            x = dS / np.broadcast_to(scale, dS.shape)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(x)) and np.all(np.isfinite(carry))):
            raise InvalidInput("objective data must be finite")
        if not self.gamma > 0:
            raise InvalidInput("risk aversion must be positive")
        # design[i, j*R + r] = f[i, r] * x[i, j]
        design = (x[:, :, None] * f[:, None, :]).reshape(n, -1)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "increments", dS)
        object.__setattr__(self, "carry", carry)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "design", design)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.increments.shape[1], self.features.shape[1]

    def exponents(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float).reshape(-1)
        return -self.gamma * (self.design @ c) + self.carry


@dataclass
class OptimResult:
    coefficients: np.ndarray
    objective_value: float
    log_objective: float
    gradient_norm: float
    iterations: int
    status: str

    @property
    def ok(self) -> bool:
        return self.status in (CONVERGED, REGULARIZED)


def _logmeanexp(e: np.ndarray) -> tuple[float, np.ndarray]:
    m = float(np.max(e))
    w = np.exp(e - m)
    s = float(np.sum(w))
    return m + math.log(s / e.size), w / s


def log_objective(data: ObjectiveData, coeffs) -> float:
    return _logmeanexp(data.exponents(coeffs))[0]


def objective(data: ObjectiveData, coeffs) -> float:
    """Empirical objective in linear scale; raises rather than returning inf."""
    value = log_objective(data, coeffs)
    if value > _LOG_MAX:
        raise ObjectiveOverflow(f"log objective {value:.6g} exceeds float range")
    return math.exp(value)


def gradient_hessian(data: ObjectiveData, coeffs, log: bool = False):
    """Gradient (d*R,) and Hessian (d*R, d*R) of the objective or of its log.

    Coefficients are flattened asset-major, matching ``coeffs.reshape(-1)``.
    """
    e = data.exponents(coeffs)
    logval, w = _logmeanexp(e)
    A = data.design
    g = data.gamma
    Aw = A.T @ w
    second = (A * w[:, None]).T @ A
    if log:
        grad = -g * Aw
        hess = g * g * (second - np.outer(Aw, Aw))
    else:
        if logval > _LOG_MAX:
            raise ObjectiveOverflow(f"log objective {logval:.6g} exceeds float range")
        psi = math.exp(logval)
        grad = -g * psi * Aw
        hess = g * g * psi * second
    return grad, 0.5 * (hess + hess.T)


@dataclass(frozen=True)
class SolverOptions:
    tol_g: float = 1e-8
    tol_x: float = 1e-10
    max_iter: int = 100
    coeff_cap: float = 1e3
    ridge: float = 1e-8
    armijo: float = 1e-4


def _newton_direction(grad, hess, ridge):
    """Solve the Newton system, adding a ridge when the Hessian is singular."""
    dim = grad.size
    eig = np.linalg.eigvalsh(hess)
    regularized = eig[0] <= 1e-12 * max(eig[-1], 0.0) or eig[-1] <= 0.0
    if regularized:
        eps = max(ridge * max(np.trace(hess), 0.0) / dim, 1e-12)
        hess = hess + eps * np.eye(dim)
    return -np.linalg.solve(hess, grad), regularized


def minimize(data: ObjectiveData, opts: SolverOptions | None = None, x0=None) -> OptimResult:
    """Damped Newton with Armijo backtracking on the log objective.

    Stops when the gradient of the log objective (the relative gradient of
    the objective) has sup-norm at most ``tol_g``, or when the accepted step
    is shorter than ``tol_x``. Crossing ``coeff_cap`` along a direction on
    which the objective keeps decreasing reports ``Unbounded``.
    """
    opts = opts or SolverOptions()
    d, R = data.shape
    c = np.zeros(d * R) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    used_ridge = False
    f = log_objective(data, c)
    status = MAX_ITER
    it = 0
    for it in range(opts.max_iter + 1):
        grad, hess = gradient_hessian(data, c, log=True)
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= opts.tol_g:
            status = REGULARIZED if used_ridge else CONVERGED
            break
        if it == opts.max_iter:
            break
        p, reg = _newton_direction(grad, hess, opts.ridge)
        used_ridge |= reg
        slope = float(grad @ p)
        if slope >= 0:  # numerically flat; fall back to steepest descent
            p, slope = -grad, -float(grad @ grad)
        t = 1.0
        # near the optimum the predicted decrease drops below rounding noise
        noise = 8 * np.finfo(float).eps * max(1.0, abs(f))
        while True:
            f_new = log_objective(data, c + t * p)
            if f_new <= f + opts.armijo * t * slope + noise or t < 1e-14:
                break
            t *= 0.5
        step = t * p
        if f_new > f + noise:  # line search failed: no further decrease possible in float
            grad, _ = gradient_hessian(data, c, log=True)
            gnorm = float(np.max(np.abs(grad)))
            status = (REGULARIZED if used_ridge else CONVERGED) if gnorm <= opts.tol_g else MAX_ITER
            break
        c = c + step
        f = f_new
        if np.linalg.norm(c) > opts.coeff_cap:
            if log_objective(data, c + step) <= f:
                status = UNBOUNDED
                gnorm = float(np.max(np.abs(gradient_hessian(data, c, log=True)[0])))
                break
        if np.linalg.norm(step) <= opts.tol_x * (1.0 + np.linalg.norm(c)):
            grad, _ = gradient_hessian(data, c, log=True)
            gnorm = float(np.max(np.abs(grad)))
            if gnorm <= opts.tol_g:
                status = REGULARIZED if used_ridge else CONVERGED
            elif used_ridge:
                status = REGULARIZED
            break
    if status == MAX_ITER:
        logger.warning("Newton stopped at max_iter=%d, gradient %.3g", opts.max_iter, gnorm)
    value = math.exp(f) if f <= _LOG_MAX else math.inf
    return OptimResult(
        coefficients=c.reshape(d, R),
        objective_value=value,
        log_objective=f,
        gradient_norm=gnorm,
        iterations=it,
        status=status,
    )
