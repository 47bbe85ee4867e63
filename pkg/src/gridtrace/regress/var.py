"""Vector autoregression: estimation, residual checks, impulse responses,
variance decomposition and coefficient-perturbation robustness."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import GridtraceError, NumericalError
from .diagnostics import (TestResult, adf_test, cointegration_test,
                          durbin_watson, granger_test, ljung_box)
from .ols import ensure_full_rank


@dataclass
class VARReport:
    """Fitted VAR(p).

    ``coefs[i]`` is the k x k matrix multiplying the lag ``i + 1`` vector.
    """

    names: list
    coefs: np.ndarray
    intercept: np.ndarray
    sigma_u: np.ndarray
    std_err: np.ndarray | None = None
    residuals: np.ndarray | None = None
    data: np.ndarray | None = None
    pre_tests: list = field(default_factory=list)
    residual_tests: list = field(default_factory=list)
    irf: np.ndarray | None = None
    fevd: np.ndarray | None = None

    @property
    def order(self) -> int:
        return self.coefs.shape[0]

    @property
    def k(self) -> int:
        return self.coefs.shape[1]

    def companion(self) -> np.ndarray:
        return companion_matrix(self.coefs)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    def is_stable(self) -> bool:
        return self.spectral_radius() < 1.0

    def predict_in_sample(self, coefs=None, intercept=None) -> np.ndarray:
        """One-step-ahead predictions for rows p..n-1 of the training data."""
        coefs = self.coefs if coefs is None else coefs
        intercept = self.intercept if intercept is None else intercept
        return _lagged(self.data, self.order) @ _stack(coefs, intercept)

    def test(self, name: str) -> list:
        return [t for t in self.pre_tests + self.residual_tests if t.name == name]

    def to_dict(self) -> dict:
        out = {
            "names": self.names, "order": self.order,
            "intercept": self.intercept.tolist(), "coefs": self.coefs.tolist(),
            "sigma_u": self.sigma_u.tolist(),
            "std_err": None if self.std_err is None else self.std_err.tolist(),
            "spectral_radius": self.spectral_radius(),
            "pre_tests": [t.to_dict() for t in self.pre_tests],
            "residual_tests": [t.to_dict() for t in self.residual_tests],
        }
        if self.irf is not None:
            out["irf"] = self.irf.tolist()
        if self.fevd is not None:
            out["fevd"] = self.fevd.tolist()
        return out


def companion_matrix(coefs: np.ndarray) -> np.ndarray:
    p, k, _ = coefs.shape
    top = np.hstack(list(coefs))
    if p == 1:
        return top
    bottom = np.hstack([np.eye(k * (p - 1)), np.zeros((k * (p - 1), k))])
    return np.vstack([top, bottom])


def _lagged(data: np.ndarray, p: int) -> np.ndarray:
    """Rows [y_{t-1}', ..., y_{t-p}', 1] for t = p..n-1."""
    n = data.shape[0]
    blocks = [data[p - i: n - i] for i in range(1, p + 1)]
    return np.hstack(blocks + [np.ones((n - p, 1))])


def _stack(coefs, intercept) -> np.ndarray:
    """Coefficient matrix B with predictions = lagged @ B."""
    return np.vstack([c.T for c in coefs] + [np.asarray(intercept)[None, :]])


def simulate_var(coefs, n: int, intercept=None, sigma=None, seed: int = 42, burn: int = 500):
    """Draw ``n`` observations from a Gaussian VAR."""
    coefs = np.asarray(coefs, dtype=float)
    p, k, _ = coefs.shape
    rng = np.random.default_rng(seed)
    intercept = np.zeros(k) if intercept is None else np.asarray(intercept, float)
    chol = np.linalg.cholesky(np.eye(k) if sigma is None else np.asarray(sigma, float))
    shocks = rng.standard_normal((n + burn, k)) @ chol.T
    y = np.zeros((n + burn, k))
    for t in range(p, n + burn):
        acc = intercept + shocks[t]
        for i in range(p):
            acc = acc + coefs[i] @ y[t - 1 - i]
        y[t] = acc
    return y[burn:]


def fit_var(data, p: int = 1, names=None, pre_tests: bool = True, lb_lags: int | None = None,
            irf_horizon: int | None = 10) -> VARReport:
    """Estimate a VAR(p) equation by equation (one OLS per variable).

    Also runs the pre-estimation battery (ADF per variable; pairwise
    Engle-Granger and Granger tests when ``pre_tests``) and the residual
    checks (ADF, Ljung-Box and Durbin-Watson per equation).
    """
    Y = np.asarray(data, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, k = Y.shape
    if p < 1:
        raise GridtraceError("bad-order", "VAR order must be >= 1")
    if not np.all(np.isfinite(Y)):
        raise GridtraceError("non-finite", "VAR input has missing values")
    if n < 10 * k * p:
        raise GridtraceError("short-series", f"{n} observations for k={k}, p={p}")
    names = list(names) if names is not None else [f"y{i}" for i in range(k)]
    X = _lagged(Y, p)
    target = Y[p:]
    col_names = [f"{v}.L{i}" for i in range(1, p + 1) for v in names] + ["const"]
    ensure_full_rank(X, col_names)
    B, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ B
    dof = target.shape[0] - X.shape[1]
    sigma_u = resid.T @ resid / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.outer(np.diag(xtx_inv), np.diag(sigma_u)))
    coefs = np.stack([B[i * k:(i + 1) * k].T for i in range(p)])
    se_coefs = np.stack([se[i * k:(i + 1) * k].T for i in range(p)])
    report = VARReport(names, coefs, B[-1].copy(), sigma_u, se_coefs, resid, Y)

    if pre_tests:
        for j, v in enumerate(names):
            res = adf_test(Y[:, j], name=f"adf[{v}]")
            res.name = "adf"
            res.details["variable"] = v
            report.pre_tests.append(res)
        for a, b in itertools.permutations(range(k), 2):
            if n >= 10 * p + 20:
                g = granger_test(Y[:, a], Y[:, b], p)
                g.details.update(cause=names[a], effect=names[b])
                report.pre_tests.append(g)
        for a, b in itertools.combinations(range(k), 2):
            if n >= 50:
                c = cointegration_test(Y[:, a], Y[:, b])
                c.details.update(x=names[a], y=names[b])
                report.pre_tests.append(c)

    lags = lb_lags or max(1, min(10, resid.shape[0] // 5))
    for j, v in enumerate(names):
        e = resid[:, j]
        for res in (adf_test(e), ljung_box(e, lags)):
            res.details["equation"] = v
            report.residual_tests.append(res)
        report.residual_tests.append(TestResult("durbin-watson", durbin_watson(e), None,
                                                details={"equation": v}))
    if irf_horizon and report.is_stable():
        try:
            report.irf = impulse_response(report, irf_horizon)
            report.fevd = fevd(report, irf_horizon)
        except NumericalError:
            pass
    return report


def ma_coefficients(coefs: np.ndarray, horizon: int) -> np.ndarray:
    """Phi_0..Phi_horizon with Phi_0 = I, Phi_h = sum_i A_i Phi_{h-i}."""
    p, k, _ = coefs.shape
    phi = np.zeros((horizon + 1, k, k))
    phi[0] = np.eye(k)
    for h in range(1, horizon + 1):
        for i in range(1, min(h, p) + 1):
            phi[h] += coefs[i - 1] @ phi[h - i]
    return phi


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NumericalError("bad-covariance", "residual covariance is not positive definite") from None


def impulse_response(report: VARReport, horizon: int = 10, orthogonalized: bool = True) -> np.ndarray:
    """Responses at horizons 0..horizon, shape ``(horizon + 1, k, k)``.

    Entry ``[h, i, j]`` is the response of variable ``i`` to a shock in ``j``.
    Orthogonalized shocks use the Cholesky factor of the residual covariance,
    so the variable order of the report is the identification order.
    """
    if not report.is_stable():
        raise NumericalError("unstable", f"spectral radius {report.spectral_radius():.4f} >= 1")
    phi = ma_coefficients(report.coefs, horizon)
    if not orthogonalized:
        return phi
    return phi @ _cholesky(report.sigma_u)


def fevd(report: VARReport, horizon: int = 10) -> np.ndarray:
    """Forecast error variance shares, shape ``(horizon, k, k)``.

    Entry ``[h, i, j]`` is the share of variable ``i``'s (h+1)-step forecast
    error variance due to shock ``j``; each ``[h, i, :]`` sums to one.
    """
    theta = impulse_response(report, horizon - 1)
    contrib = np.cumsum(theta ** 2, axis=0)
    total = contrib.sum(axis=2, keepdims=True)
    return contrib / total


@dataclass
class RobustnessSummary:
    epsilon: float
    trials: int
    inflation: np.ndarray
    unstable_trials: int

    @property
    def median_inflation(self) -> float:
        return float(np.median(self.inflation))

    @property
    def flagged(self) -> bool:
        return self.unstable_trials > 0

    def to_dict(self) -> dict:
        q = np.quantile(self.inflation, [0.0, 0.5, 0.9, 1.0]) if self.inflation.size else [0] * 4
        return {"epsilon": self.epsilon, "trials": self.trials,
                "inflation_min": float(q[0]), "inflation_median": float(q[1]),
                "inflation_p90": float(q[2]), "inflation_max": float(q[3]),
                "unstable_trials": self.unstable_trials, "flagged": self.flagged}


def robustness_test(report: VARReport, epsilon: float = 0.01, trials: int = 100,
                    seed: int = 42) -> RobustnessSummary:
    """Scale every coefficient by ``1 + U(-epsilon, epsilon)`` and measure the
    relative increase of in-sample one-step RMSE; count trials whose
    companion matrix has spectral radius above one."""
    if report.data is None:
        raise GridtraceError("no-data", "report does not carry its training data")
    rng = np.random.default_rng(seed)
    target = report.data[report.order:]
    base = math.sqrt(np.mean((target - report.predict_in_sample()) ** 2))
    inflation = np.empty(trials)
    unstable = 0
    for t in range(trials):
        scale = 1.0 + rng.uniform(-epsilon, epsilon, size=report.coefs.shape)
        icpt = report.intercept * (1.0 + rng.uniform(-epsilon, epsilon, size=report.k))
        coefs = report.coefs * scale
        pred = report.predict_in_sample(coefs, icpt)
        rmse = math.sqrt(np.mean((target - pred) ** 2))
        inflation[t] = rmse / base - 1.0 if base > 0 else 0.0
        if np.max(np.abs(np.linalg.eigvals(companion_matrix(coefs)))) > 1.0:
            unstable += 1
    return RobustnessSummary(epsilon, trials, inflation, unstable)
