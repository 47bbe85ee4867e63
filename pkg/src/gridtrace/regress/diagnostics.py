"""Hypothesis tests used before and after estimation.

Unit-root critical values come from MacKinnon's (2010) response surfaces,
``cv(T) = b0 + b1/T + b2/T**2 + b3/T**3``, embedded below for the Dickey-Fuller
case (one series) and the Engle-Granger case (two series).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import GridtraceError, NumericalError

LEVELS = ("1%", "5%", "10%")

# rows: 1%, 5%, 10%; columns: b0, b1, b2, b3
_TAU = {
    (1, "n"): [[-2.56574, -2.2358, -3.627, 0.0],
               [-1.94100, -0.2686, -3.365, 31.223],
               [-1.61682, 0.2656, -2.714, 25.364]],
    (1, "c"): [[-3.43035, -6.5393, -16.786, -79.433],
               [-2.86154, -2.8903, -4.234, -40.040],
               [-2.56677, -1.5384, -2.809, 0.0]],
    (1, "ct"): [[-3.95877, -9.0531, -28.428, -134.155],
                [-3.41049, -4.3904, -9.036, -45.374],
                [-3.12705, -2.5856, -3.925, -22.380]],
    (2, "c"): [[-3.89644, -10.9519, -33.527, 0.0],
               [-3.33613, -6.1101, -6.823, 0.0],
               [-3.04445, -4.2412, -2.720, 0.0]],
    (2, "ct"): [[-4.32762, -15.4387, -35.679, 0.0],
                [-3.78057, -9.5106, -12.074, 0.0],
                [-3.49631, -7.0815, -7.538, 21.892]],
}


def mackinnon_critical_values(nobs: int, regression: str = "c", n_series: int = 1) -> dict:
    """Critical values at 1%, 5% and 10% for a sample of ``nobs``."""
    try:
        table = np.asarray(_TAU[(n_series, regression)])
    except KeyError:
        raise GridtraceError("bad-regression", f"no table for {n_series} series, {regression!r}") from None
    inv = 1.0 / nobs
    powers = np.array([1.0, inv, inv ** 2, inv ** 3])
    return dict(zip(LEVELS, (table @ powers).tolist()))


@dataclass
class TestResult:
    """Outcome of one hypothesis test.

    ``reject`` maps each significance level to whether the null is rejected.
    """

    name: str
    statistic: float
    pvalue: float | None = None
    critical_values: dict = field(default_factory=dict)
    reject: dict = field(default_factory=dict)
    null: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pvalue is not None and not (0.0 <= self.pvalue <= 1.0):
            raise GridtraceError("bad-pvalue", f"p-value {self.pvalue} outside [0, 1]")
        if not self.reject and self.pvalue is not None:
            self.reject = {lv: self.pvalue < float(lv[:-1]) / 100 for lv in LEVELS}

    def rejected(self, level: str = "5%") -> bool:
        return bool(self.reject.get(level, False))

    def to_dict(self) -> dict:
        return {"name": self.name, "statistic": _json_float(self.statistic),
                "pvalue": self.pvalue, "critical_values": self.critical_values,
                "reject": self.reject, "null": self.null, "details": self.details}


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


def jarque_bera(residuals) -> TestResult:
    """Normality test from sample skewness and kurtosis; chi-square(2) p-value."""
    e = np.asarray(residuals, dtype=float)
    n = e.size
    c = e - e.mean()
    m2 = np.mean(c ** 2)
    if m2 == 0:
        return TestResult("jarque-bera", 0.0, 1.0, null="normal residuals",
                          details={"skew": 0.0, "kurtosis": 3.0, "degenerate": True})
    skew = np.mean(c ** 3) / m2 ** 1.5
    kurt = np.mean(c ** 4) / m2 ** 2
    jb = n / 6.0 * (skew ** 2 + (kurt - 3.0) ** 2 / 4.0)
    return TestResult("jarque-bera", float(jb), float(stats.chi2.sf(jb, 2)),
                      null="normal residuals", details={"skew": float(skew), "kurtosis": float(kurt)})


def durbin_watson(residuals) -> float:
    """Sum of squared successive differences over the sum of squares, in [0, 4]."""
    e = np.asarray(residuals, dtype=float)
    if e.size < 2:
        raise GridtraceError("short-series", "Durbin-Watson needs two residuals")
    ss = float(e @ e)
    if ss == 0:
        raise GridtraceError("zero-variance", "residuals are identically zero")
    d = np.diff(e)
    return float(d @ d / ss)


def acf(x, nlags: int) -> np.ndarray:
    """Sample autocorrelations at lags 1..nlags (biased denominator)."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    denom = float(c @ c)
    if denom == 0:
        raise GridtraceError("zero-variance", "series is constant")
    return np.array([c[k:] @ c[:-k] / denom for k in range(1, nlags + 1)])


def ljung_box(residuals, lags: int = 10, dof: int = 0) -> TestResult:
    """Portmanteau test for autocorrelation up to ``lags``.

    ``dof`` removes fitted ARMA parameters from the chi-square degrees of freedom.
    """
    e = np.asarray(residuals, dtype=float)
    n = e.size
    if n <= lags:
        raise GridtraceError("short-series", f"{n} residuals for {lags} lags")
    rho = acf(e, lags)
    k = np.arange(1, lags + 1)
    q = float(n * (n + 2) * np.sum(rho ** 2 / (n - k)))
    df = max(lags - dof, 1)
    return TestResult("ljung-box", q, float(stats.chi2.sf(q, df)), null="no autocorrelation",
                      details={"lags": lags, "df": df})


def _lstsq(X, y):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, resid


def _adf_design(x: np.ndarray, lag: int, regression: str, nobs: int | None = None):
    dx = np.diff(x)
    start = lag
    y = dx[start:]
    cols = [x[start:-1]]
    cols += [dx[start - i: dx.size - i] for i in range(1, lag + 1)]
    if regression in ("c", "ct"):
        cols.append(np.ones(y.size))
    if regression == "ct":
        cols.append(np.arange(1, y.size + 1, dtype=float))
    X = np.column_stack(cols)
    if nobs is not None:
        X, y = X[-nobs:], y[-nobs:]
    return X, y


def default_max_lag(n: int) -> int:
    return int(math.ceil(12.0 * (n / 100.0) ** 0.25))


def adf_test(series, max_lag="auto", regression: str = "c", n_series: int = 1,
             name: str = "adf") -> TestResult:
    """Augmented Dickey-Fuller test of a unit root.

    Regresses the first difference on the lagged level, lagged differences and
    the deterministic terms of ``regression`` (``"n"``, ``"c"`` or ``"ct"``).
    With ``max_lag="auto"`` the lag order minimizing AIC on a common sample is
    used. A degenerate regression (no residual variance, or the lagged level
    not identifiable) yields a NaN statistic and no rejection.
    """
    x = np.asarray(series, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise GridtraceError("non-finite", "ADF input has missing values")
    n = x.size
    if max_lag == "auto":
        top = min(default_max_lag(n), max(n // 2 - 12, 0))
    else:
        top = int(max_lag)
    if n < 20 + top:
        raise GridtraceError("short-series", f"{n} points for max lag {top}")

    lag = top
    if max_lag == "auto" and top > 0:
        common = n - 1 - top
        best = math.inf
        for k in range(top + 1):
            X, y = _adf_design(x, k, regression, nobs=common)
            _, e = _lstsq(X, y)
            ssr = float(e @ e)
            aic = common * math.log(ssr / common) + 2 * X.shape[1] if ssr > 0 else -math.inf
            if aic < best:
                best, lag = aic, k
    X, y = _adf_design(x, lag, regression)
    nobs = y.size
    crit = mackinnon_critical_values(nobs, regression, n_series)
    details = {"lag": lag, "nobs": nobs, "regression": regression}

    beta, e = _lstsq(X, y)
    ssr = float(e @ e)
    rank = np.linalg.matrix_rank(X)
    others = np.linalg.matrix_rank(X[:, 1:]) if X.shape[1] > 1 else 0
    scale = float(y @ y) or 1.0
    if rank < X.shape[1] and others == rank or ssr <= 1e-20 * scale * max(nobs, 1) or nobs <= X.shape[1]:
        details["degenerate"] = True
        return TestResult(name, math.nan, None, crit, {lv: False for lv in LEVELS},
                          null="unit root", details=details)
    sigma2 = ssr / (nobs - rank)
    cov = sigma2 * np.linalg.pinv(X.T @ X)
    stat = float(beta[0] / math.sqrt(cov[0, 0]))
    reject = {lv: stat < crit[lv] for lv in LEVELS}
    details["gamma"] = float(beta[0])
    return TestResult(name, stat, None, crit, reject, null="unit root", details=details)


def cointegration_test(x, y, max_lag="auto", trend: str = "c") -> TestResult:
    """Engle-Granger two-step test (null: no cointegration).

    OLS of ``y`` on ``x`` with the deterministic ``trend``, then an ADF test
    without deterministic terms on the residuals against the two-series
    critical values. Identically zero residuals count as cointegrated.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise GridtraceError("misaligned", "series lengths differ")
    if x.size < 50:
        raise GridtraceError("short-series", "cointegration needs at least 50 points")
    cols = [x, np.ones(x.size)]
    if trend == "ct":
        cols.append(np.arange(x.size, dtype=float))
    X = np.column_stack(cols)
    beta, resid = _lstsq(X, y)
    scale = float(y @ y) or 1.0
    if float(resid @ resid) <= 1e-20 * scale:
        crit = mackinnon_critical_values(x.size - 1, trend, 2)
        return TestResult("engle-granger", -math.inf, None, crit, {lv: True for lv in LEVELS},
                          null="no cointegration",
                          details={"degenerate": True, "coef": beta.tolist()})
    res = adf_test(resid, max_lag, regression="n", name="engle-granger")
    crit = mackinnon_critical_values(res.details["nobs"], trend, 2)
    stat = res.statistic
    reject = {lv: bool(np.isfinite(stat) and stat < crit[lv]) for lv in LEVELS}
    details = dict(res.details, coef=beta.tolist())
    return TestResult("engle-granger", stat, None, crit, reject, null="no cointegration",
                      details=details)


def f_test(ssr_restricted: float, ssr_full: float, n_restrictions: int, df_resid: int):
    """Generic nested-model F statistic and its p-value."""
    if ssr_full <= 0:
        raise NumericalError("zero-variance", "unrestricted model fits perfectly")
    f = ((ssr_restricted - ssr_full) / n_restrictions) / (ssr_full / df_resid)
    return float(f), float(stats.f.sf(f, n_restrictions, df_resid))


def lag_matrix(x: np.ndarray, p: int) -> np.ndarray:
    """Columns x_{t-1}, ..., x_{t-p} for t = p..n-1."""
    return np.column_stack([x[p - i: x.size - i] for i in range(1, p + 1)])


def granger_test(cause, effect, p: int = 1) -> TestResult:
    """F test that lags of ``cause`` add nothing to an AR(p) of ``effect``.

    Null: ``cause`` does not Granger-cause ``effect``.
    """
    from .ols import ensure_full_rank

    c = np.asarray(cause, dtype=float).ravel()
    e = np.asarray(effect, dtype=float).ravel()
    if c.size != e.size:
        raise GridtraceError("misaligned", "series lengths differ")
    if c.size < 10 * p + 20:
        raise GridtraceError("short-series", f"{c.size} points for {p} lags")
    y = e[p:]
    own = lag_matrix(e, p)
    other = lag_matrix(c, p)
    const = np.ones((y.size, 1))
    names_r = [f"effect.L{i}" for i in range(1, p + 1)] + ["const"]
    names_u = names_r + [f"cause.L{i}" for i in range(1, p + 1)]
    Xr = np.hstack([own, const])
    Xu = np.hstack([own, const, other])
    ensure_full_rank(Xu, names_u)
    _, er = _lstsq(Xr, y)
    _, eu = _lstsq(Xu, y)
    ssr_r, ssr_u = float(er @ er), float(eu @ eu)
    df = y.size - Xu.shape[1]
    f, pval = f_test(ssr_r, ssr_u, p, df)
    return TestResult("granger", f, pval, null="no Granger causality",
                      details={"lags": p, "ssr_restricted": ssr_r, "ssr_full": ssr_u,
                               "df_num": p, "df_den": df})
