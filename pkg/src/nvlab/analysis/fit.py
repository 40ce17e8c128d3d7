"""Weighted nonlinear least squares via damped (Levenberg-Marquardt) steps.

The damped normal equations are solved with a diagonal scaling taken from
J^T J, the damping factor shrinks on accepted steps and grows on rejected
ones, and iteration stops when the relative step falls below 1e-8 or after
200 iterations. Parameter uncertainties come from the covariance of the
linearized problem at the optimum.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .models import ModelSpec


class FitError(ValueError):
    pass


class SingularJacobianError(FitError):
    pass


MAX_ITER = 200
STEP_TOL = 1e-8


@dataclass
class FitResult:
    """Outcome of one least-squares fit."""

    model: str
    parameters: Dict[str, Tuple[float, float]]  # name -> (value, 1-sigma)
    residual_norm: float
    converged: bool
    n_iter: int = 0

    def value(self, name: str) -> float:
        return self.parameters[name][0]

    def sigma(self, name: str) -> float:
        return self.parameters[name][1]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": {k: [float(v), float(s)]
                           for k, (v, s) in self.parameters.items()},
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(model=d["model"],
                   parameters={k: (float(v[0]), float(v[1]))
                               for k, v in d["parameters"].items()},
                   residual_norm=float(d["residual_norm"]),
                   converged=bool(d["converged"]),
                   n_iter=int(d.get("n_iter", 0)))


def fit(spec: ModelSpec, x, y, sigma=None) -> FitResult:
    """Fit a ModelSpec to (x, y) with per-point standard deviations."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    model = spec.model()
    p, lo, hi = spec.vectors()
    n_par = len(p)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-D arrays of equal length")
    if len(x) < n_par + 1:
        raise FitError("need at least n_params + 1 data points")
    if sigma is None:
        w = np.ones_like(y)
    else:
        sigma = np.asarray(sigma, dtype=float)
        if (sigma <= 0).any():
            raise FitError("sigma values must be > 0")
        w = 1.0 / sigma

    def residuals(pv):
        return (y - model(pv, x)) * w

    r = residuals(p)
    cost = 0.5 * float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        jac = model.jacobian(p, x) * w[:, None]
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        if not np.all(np.isfinite(jtj)) or np.all(diag == 0):
            raise SingularJacobianError("Jacobian is singular at the "
                                        "current parameter point")
        diag[diag == 0] = 1.0
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_new = np.clip(p + step, lo, hi)
            r_new = residuals(p_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 5.0
        if not accepted:
            break
        rel_step = np.max(np.abs(p_new - p) / np.maximum(np.abs(p_new), 1e-300))
        p, r, cost = p_new, r_new, cost_new
        lam = max(lam / 3.0, 1e-12)
        if rel_step < STEP_TOL:
            converged = True
            break

    jac = model.jacobian(p, x) * w[:, None]
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj)
        errors = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        errors = np.full(n_par, np.nan)
    params = {name: (float(p[i]), float(errors[i]))
              for i, name in enumerate(model.param_names)}
    return FitResult(model=model.kind, parameters=params,
                     residual_norm=float(np.linalg.norm(r)),
                     converged=converged, n_iter=it)
