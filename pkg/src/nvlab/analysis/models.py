"""Fit model functions with analytic Jacobians.

Three model families cover the experiment suite: exponential decay,
the decaying-cosine Rabi signal, and sums of Lorentzian dips on a flat
photoluminescence baseline.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Model:
    """A named model: y = f(params, x) with analytic Jacobian."""

    kind: str
    param_names: Tuple[str, ...]
    _eval: callable
    _jac: callable

    def __call__(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self._eval(np.asarray(params, float), np.asarray(x, float))

    def jacobian(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        """d y / d params, shape (len(x), n_params)."""
        return self._jac(np.asarray(params, float), np.asarray(x, float))


def _exp_eval(p, x):
    amp, tau, off = p
    return amp * np.exp(-x / tau) + off


def _exp_jac(p, x):
    amp, tau, off = p
    e = np.exp(-x / tau)
    return np.column_stack([e, amp * e * x / tau**2, np.ones_like(x)])


def _rabi_eval(p, x):
    a, omega, phi, t2, c = p
    return a * np.cos(2 * np.pi * omega * x + phi) * np.exp(-x / t2) + c


def _rabi_jac(p, x):
    a, omega, phi, t2, c = p
    arg = 2 * np.pi * omega * x + phi
    env = np.exp(-x / t2)
    cos_, sin_ = np.cos(arg), np.sin(arg)
    return np.column_stack([
        cos_ * env,
        -a * sin_ * env * 2 * np.pi * x,
        -a * sin_ * env,
        a * cos_ * env * x / t2**2,
        np.ones_like(x),
    ])


def _lorentz_eval(p, x):
    # p = [offset, a_1, x0_1, w_1, a_2, x0_2, w_2, ...]
    off = p[0]
    dip = np.zeros_like(x)
    for i in range((len(p) - 1) // 3):
        a, x0, w = p[1 + 3 * i:4 + 3 * i]
        hw2 = (w / 2) ** 2
        dip += a * hw2 / ((x - x0) ** 2 + hw2)
    return off * (1.0 - dip)


def _lorentz_jac(p, x):
    off = p[0]
    n = (len(p) - 1) // 3
    cols = []
    dip = np.zeros_like(x)
    peak_cols = []
    for i in range(n):
        a, x0, w = p[1 + 3 * i:4 + 3 * i]
        hw2 = (w / 2) ** 2
        denom = (x - x0) ** 2 + hw2
        lor = hw2 / denom
        dip += a * lor
        d_a = lor
        d_x0 = a * hw2 * 2 * (x - x0) / denom**2
        d_w = a * (w / 2) * ((x - x0) ** 2) / denom**2
        peak_cols.extend([-off * d_a, -off * d_x0, -off * d_w])
    cols.append(1.0 - dip)
    cols.extend(peak_cols)
    return np.column_stack(cols)


def _gauss_eval(p, x):
    amp, x0, sigma, off = p
    return amp * np.exp(-((x - x0) ** 2) / (2 * sigma**2)) + off


def _gauss_jac(p, x):
    amp, x0, sigma, off = p
    d = x - x0
    e = np.exp(-d**2 / (2 * sigma**2))
    return np.column_stack([
        e,
        amp * e * d / sigma**2,
        amp * e * d**2 / sigma**3,
        np.ones_like(x),
    ])


def _stretched_eval(p, x):
    amp, tau, n, off = p
    return amp * np.exp(-((x / tau) ** n)) + off


def _stretched_jac(p, x):
    amp, tau, n, off = p
    u = x / tau
    un = u**n
    e = np.exp(-un)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_u = np.where(u > 0, np.log(np.where(u > 0, u, 1.0)), 0.0)
    return np.column_stack([
        e,
        amp * e * n * un / tau,
        -amp * e * un * log_u,
        np.ones_like(x),
    ])


_MODELS = {
    "exp_decay": Model("exp_decay", ("amplitude", "tau", "offset"),
                       _exp_eval, _exp_jac),
    "rabi_eq4": Model("rabi_eq4", ("a", "omega", "phi", "t2_star", "c"),
                      _rabi_eval, _rabi_jac),
    "gaussian_peak": Model("gaussian_peak",
                           ("amplitude", "center", "sigma", "offset"),
                           _gauss_eval, _gauss_jac),
    "stretched_exp": Model("stretched_exp",
                           ("amplitude", "tau", "exponent", "offset"),
                           _stretched_eval, _stretched_jac),
}


def get_model(kind: str, n_peaks: int = 1) -> Model:
    """Look up a model; 'lorentzian_multi' takes the number of dips."""
    if kind == "lorentzian_multi":
        names = ["offset"]
        for i in range(n_peaks):
            names.extend([f"a{i}", f"center{i}", f"fwhm{i}"])
        return Model(f"lorentzian_multi({n_peaks})", tuple(names),
                     _lorentz_eval, _lorentz_jac)
    try:
        return _MODELS[kind]
    except KeyError:
        raise ModelError(f"unknown model kind {kind!r}") from None


@dataclass
class ModelSpec:
    """A model plus starting point and box constraints for the fitter."""

    kind: str
    initial_guess: Dict[str, float]
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    n_peaks: int = 1

    def model(self) -> Model:
        return get_model(self.kind, self.n_peaks)

    def vectors(self):
        """(p0, lo, hi) arrays in the model's parameter order."""
        m = self.model()
        missing = set(m.param_names) - set(self.initial_guess)
        if missing:
            raise ModelError(f"initial guess missing {sorted(missing)}")
        p0 = np.array([self.initial_guess[n] for n in m.param_names])
        lo = np.array([self.bounds.get(n, (-np.inf, np.inf))[0]
                       for n in m.param_names])
        hi = np.array([self.bounds.get(n, (-np.inf, np.inf))[1]
                       for n in m.param_names])
        if (lo > hi).any():
            raise ModelError("bounds must satisfy lo <= hi")
        if ((p0 < lo) | (p0 > hi)).any():
            raise ModelError("initial guess outside bounds")
        return p0, lo, hi


def eval_model(spec: ModelSpec, params: Dict[str, float], x) -> np.ndarray:
    """Evaluate a ModelSpec at named parameter values."""
    m = get_model(spec.kind, spec.n_peaks)
    p = np.array([params[n] for n in m.param_names], dtype=float)
    return m(p, np.asarray(x, dtype=float))


# Default parameter bounds used by the experiment fits; they remove the
# sign/aliasing degeneracies of the decaying cosine (omega -> -omega,
# phi -> -phi) without constraining any physical regime of interest.
RABI_BOUNDS = {
    "a": (0.0, np.inf),
    "omega": (1.0, 1e9),
    "phi": (-math.pi, math.pi),
    "t2_star": (1e-9, 1.0),
    "c": (-np.inf, np.inf),
}
DECAY_BOUNDS = {"amplitude": (0.0, np.inf), "tau": (1e-9, 1.0),
                "offset": (-np.inf, np.inf)}
GAUSS_BOUNDS = {"amplitude": (0.0, np.inf), "center": (-np.inf, np.inf),
                "sigma": (1e-12, np.inf), "offset": (-np.inf, np.inf)}
STRETCHED_BOUNDS = {"amplitude": (0.0, np.inf), "tau": (1e-9, 1.0),
                    "exponent": (0.2, 5.0), "offset": (-np.inf, np.inf)}
