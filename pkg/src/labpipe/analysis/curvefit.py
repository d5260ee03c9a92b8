"""Model registry and damped least-squares fitting for 1D curves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..ingest import Curve1D


class UnknownModel(KeyError):
    pass


@dataclass(frozen=True)
class CurveModel:
    model_id: str
    param_names: tuple[str, ...]
    param_units: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray]  # (n, n_params)
    init: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FitResult:
    model_id: str
    parameters: dict[str, float]
    covariance: np.ndarray
    reduced_chi_square: float
    residuals: np.ndarray
    converged: bool
    singular_jacobian: bool = False


def _linear_f(x, p):
    return p[0] * x + p[1]


def _linear_g(x, p):
    return np.stack([x, np.ones_like(x)], axis=1)


def _linear_init(x, y):
    return np.asarray(np.polyfit(x, y, 1))


def _gauss_f(x, p):
    a, c, w = p
    return a * np.exp(-((x - c) ** 2) / (2 * w**2))


def _gauss_g(x, p):
    a, c, w = p
    e = np.exp(-((x - c) ** 2) / (2 * w**2))
    return np.stack([e, a * e * (x - c) / w**2, a * e * (x - c) ** 2 / w**3], axis=1)


def _peak_init(x, y):
    a = float(y.max() - y.min())
    c = float(x[np.argmax(y)])
    w = float((x.max() - x.min()) / 10) or 1.0
    return np.array([a if a else 1.0, c, w])


def _lorentz_f(x, p):
    a, c, w = p
    return a * w**2 / ((x - c) ** 2 + w**2)


def _lorentz_g(x, p):
    a, c, w = p
    d = (x - c) ** 2 + w**2
    return np.stack(
        [
            w**2 / d,
            2 * a * w**2 * (x - c) / d**2,
            2 * a * w * (x - c) ** 2 / d**2,
        ],
        axis=1,
    )


def _lorlin_f(x, p):
    return _lorentz_f(x, p[:3]) + p[3] * x + p[4]


def _lorlin_g(x, p):
    return np.concatenate([_lorentz_g(x, p[:3]), np.stack([x, np.ones_like(x)], axis=1)], axis=1)


def _lorlin_init(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return np.concatenate([_peak_init(x, resid), [slope, intercept]])


def _exp_f(x, p):
    return p[0] * np.exp(-x / p[1])


def _exp_g(x, p):
    a, tau = p
    e = np.exp(-x / tau)
    return np.stack([e, a * e * x / tau**2], axis=1)


def _exp_init(x, y):
    a = float(y[0]) if y[0] != 0 else 1.0
    tau = float((x.max() - x.min()) / 3) or 1.0
    return np.array([a, tau])


def _pow_f(x, p):
    return p[0] * np.power(x, p[1])


def _pow_g(x, p):
    a, q = p
    xq = np.power(x, q)
    return np.stack([xq, a * xq * np.log(x)], axis=1)


def _pow_init(x, y):
    mask = (x > 0) & (y > 0)
    if mask.sum() >= 2:
        q, loga = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
        return np.array([np.exp(loga), q])
    return np.array([1.0, 1.0])


def _two_f(x, p):
    return _gauss_f(x, p[:3]) + _gauss_f(x, p[3:])


def _two_g(x, p):
    return np.concatenate([_gauss_g(x, p[:3]), _gauss_g(x, p[3:])], axis=1)


def _two_init(x, y):
    mid = len(x) // 2
    return np.concatenate([_peak_init(x[:mid], y[:mid]), _peak_init(x[mid:], y[mid:])])


MODEL_REGISTRY: dict[str, CurveModel] = {
    m.model_id: m
    for m in [
        CurveModel("linear", ("slope", "intercept"), ("y/x", "y"), _linear_f, _linear_g, _linear_init),
        CurveModel(
            "gaussian_peak", ("amplitude", "center", "width"), ("y", "x", "x"),
            _gauss_f, _gauss_g, _peak_init,
        ),
        CurveModel(
            "lorentzian_peak", ("amplitude", "center", "width"), ("y", "x", "x"),
            _lorentz_f, _lorentz_g, _peak_init,
        ),
        CurveModel(
            "lorentzian_linear",
            ("amplitude", "center", "width", "slope", "intercept"),
            ("y", "x", "x", "y/x", "y"),
            _lorlin_f, _lorlin_g, _lorlin_init,
        ),
        CurveModel(
            "exponential_decay", ("amplitude", "tau"), ("y", "x"), _exp_f, _exp_g, _exp_init
        ),
        CurveModel("power_law", ("amplitude", "exponent"), ("y", ""), _pow_f, _pow_g, _pow_init),
        CurveModel(
            "sum_of_two_peaks",
            ("amplitude1", "center1", "width1", "amplitude2", "center2", "width2"),
            ("y", "x", "x", "y", "x", "x"),
            _two_f, _two_g, _two_init,
        ),
    ]
}


def fit_curve(
    curve: Curve1D,
    model_id: str,
    initial_guess: Optional[np.ndarray] = None,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> FitResult:
    if model_id not in MODEL_REGISTRY:
        raise UnknownModel(model_id)
    model = MODEL_REGISTRY[model_id]
    x, y = curve.x, curve.y
    weights = 1.0 / curve.sigma if curve.sigma is not None else np.ones_like(y)

    p = np.asarray(initial_guess, dtype=np.float64) if initial_guess is not None else model.init(x, y)
    if len(p) != len(model.param_names):
        raise ValueError(f"{model_id} expects {len(model.param_names)} parameters, got {len(p)}")

    def cost_of(params):
        r = (model.func(x, params) - y) * weights
        return float(r @ r), r

    cost, resid = cost_of(p)
    lam = 1e-3
    converged = False
    singular = False
    for _ in range(max_iter):
        jac = model.grad(x, p) * weights[:, None]
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        stepped = False
        for _ in range(20):  # inner damping adjustments
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-30)), -jtr)
            except np.linalg.LinAlgError:
                singular = True
                break
            new_cost, new_resid = cost_of(p + delta)
            if np.isfinite(new_cost) and new_cost < cost:
                rel_drop = (cost - new_cost) / max(cost, 1e-300)
                p, cost, resid = p + delta, new_cost, new_resid
                lam = max(lam / 10.0, 1e-12)
                stepped = True
                if rel_drop < tol:
                    converged = True
                break
            lam *= 10.0
            if lam > 1e12:
                break
        if singular or not stepped:
            converged = converged or cost == 0.0
            break
        if converged:
            break

    jac = model.grad(x, p) * weights[:, None]
    jtj = jac.T @ jac
    dof = max(len(x) - len(p), 1)
    try:
        cov = np.linalg.inv(jtj) * cost / dof
    except np.linalg.LinAlgError:
        singular = True
        cov = np.full((len(p), len(p)), np.nan)
    return FitResult(
        model_id=model_id,
        parameters=dict(zip(model.param_names, (float(v) for v in p))),
        covariance=cov,
        reduced_chi_square=cost / dof,
        residuals=model.func(x, p) - y,
        converged=converged,
        singular_jacobian=singular,
    )
