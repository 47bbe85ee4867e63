"""Ordinary least squares with linear, quadratic, interaction and log terms."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import GridtraceError, NumericalError
from ..learners import FeatureMatrix
from .diagnostics import TestResult, durbin_watson, jarque_bera

TERM_KINDS = ("intercept", "linear", "quadratic", "interaction", "log")


@dataclass(frozen=True)
class Term:
    kind: str
    args: tuple = ()

    def __post_init__(self):
        arity = {"intercept": 0, "linear": 1, "quadratic": 1, "log": 1, "interaction": 2}
        if self.kind not in arity:
            raise GridtraceError("bad-term", f"unknown term kind {self.kind!r}")
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) != arity[self.kind]:
            raise GridtraceError("bad-term", f"{self.kind} takes {arity[self.kind]} variables")

    @property
    def label(self) -> str:
        if self.kind == "intercept":
            return "const"
        a = self.args
        return {"linear": a[0], "quadratic": f"{a[0]}^2", "log": f"log({a[0]})",
                "interaction": f"{a[0]}:{a[-1]}"}[self.kind]

    def evaluate(self, data: FeatureMatrix) -> np.ndarray:
        n = data.shape[0]
        if self.kind == "intercept":
            return np.ones(n)
        try:
            cols = [data.column(a) for a in self.args]
        except ValueError:
            raise GridtraceError("bad-term", f"unknown variable in {self.label}") from None
        if self.kind == "linear":
            return cols[0]
        if self.kind == "quadratic":
            return cols[0] ** 2
        if self.kind == "interaction":
            return cols[0] * cols[1]
        if np.any(cols[0] <= 0):
            raise GridtraceError("bad-term", f"{self.label} needs positive data")
        return np.log(cols[0])

    @classmethod
    def parse(cls, text: str) -> "Term":
        """``1`` / ``const``, ``x``, ``x^2``, ``x:y``, ``log(x)``."""
        t = text.strip()
        if t in ("1", "const", "intercept"):
            return cls("intercept")
        if m := re.fullmatch(r"log\((\w+)\)", t):
            return cls("log", (m.group(1),))
        if m := re.fullmatch(r"(\w+)\^2", t):
            return cls("quadratic", (m.group(1),))
        if m := re.fullmatch(r"(\w+)[:*](\w+)", t):
            return cls("interaction", (m.group(1), m.group(2)))
        if re.fullmatch(r"\w+", t):
            return cls("linear", (t,))
        raise GridtraceError("bad-term", f"cannot parse term {text!r}")


@dataclass(frozen=True)
class OLSSpec:
    response: str
    terms: tuple

    def __post_init__(self):
        terms = tuple(t if isinstance(t, Term) else Term.parse(t) for t in self.terms)
        labels = [t.label for t in terms]
        if len(set(labels)) != len(labels):
            raise GridtraceError("bad-spec", "duplicate terms")
        if not terms:
            raise GridtraceError("bad-spec", "no terms")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def parse(cls, formula: str) -> "OLSSpec":
        """``"y ~ x + x^2 + x:z + log(w) + 1"``."""
        lhs, _, rhs = formula.partition("~")
        if not rhs:
            raise GridtraceError("bad-spec", f"formula needs '~': {formula!r}")
        return cls(lhs.strip(), tuple(Term.parse(p) for p in rhs.split("+")))

    @property
    def labels(self) -> list:
        return [t.label for t in self.terms]

    @property
    def has_intercept(self) -> bool:
        return any(t.kind == "intercept" for t in self.terms)

    def design(self, data: FeatureMatrix) -> np.ndarray:
        return np.column_stack([t.evaluate(data) for t in self.terms])


def ensure_full_rank(X: np.ndarray, names) -> None:
    """Raise ``collinear`` naming the columns that add nothing to the rank."""
    if np.linalg.matrix_rank(X) == X.shape[1]:
        return
    offending, kept = [], []
    for j in range(X.shape[1]):
        trial = kept + [j]
        if np.linalg.matrix_rank(X[:, trial]) == len(trial):
            kept = trial
        else:
            offending.append(names[j])
    raise NumericalError("collinear", f"linearly dependent terms: {', '.join(offending)}",
                         terms=offending)


@dataclass
class OLSReport:
    names: list
    coef: np.ndarray
    std_err: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    r2: float
    adj_r2: float
    f_stat: float
    f_pvalue: float
    normality: TestResult
    durbin_watson: float
    residuals: np.ndarray
    fitted: np.ndarray
    nobs: int
    df_resid: int
    response: str = "y"
    cov: np.ndarray | None = field(default=None, repr=False)

    def coefficient(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def significant(self, level: float = 0.05) -> dict:
        return {n: bool(p < level) for n, p in zip(self.names, self.p_value)}

    def table(self) -> str:
        """Plain-text coefficient table (Coeff, Std, t-Test, p-Value)."""
        width = max(9, *(len(n) for n in self.names))
        lines = [f"{'Parameter':<{width}}  {'Coeff':>10}  {'Std':>9}  {'t-Test':>9}  {'p-Value':>8}"]
        lines.append("-" * len(lines[0]))
        for n, c, s, t, p in zip(self.names, self.coef, self.std_err, self.t_stat, self.p_value):
            lines.append(f"{n:<{width}}  {c:>10.4f}  {s:>9.3f}  {t:>9.3f}  {p:>8.3f}")
        lines.append("-" * len(lines[0]))
        lines.append(f"R2 {self.r2:.4f}  adj-R2 {self.adj_r2:.4f}  F {self.f_stat:.3f} "
                     f"(p={self.f_pvalue:.3g})  JB {self.normality.statistic:.3f} "
                     f"(p={self.normality.pvalue:.3g})  DW {self.durbin_watson:.3f}  n={self.nobs}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "coefficients": [
                {"name": n, "coef": float(c), "std_err": float(s), "t": float(t), "p": float(p)}
                for n, c, s, t, p in zip(self.names, self.coef, self.std_err, self.t_stat, self.p_value)
            ],
            "r2": self.r2, "adj_r2": self.adj_r2, "f_stat": self.f_stat, "f_pvalue": self.f_pvalue,
            "normality": self.normality.to_dict(), "durbin_watson": self.durbin_watson,
            "nobs": self.nobs, "df_resid": self.df_resid,
        }


def ols_matrix(X: np.ndarray, y: np.ndarray, names=None, intercept: bool | None = None,
               response: str = "y") -> OLSReport:
    """OLS on an explicit design matrix."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, k = X.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    if y.size != n:
        raise GridtraceError("misaligned", f"{n} rows vs {y.size} responses")
    if n <= k:
        raise GridtraceError("short-series", f"{n} observations for {k} terms")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise GridtraceError("non-finite", "OLS inputs contain missing values")
    ensure_full_rank(X, names)
    if intercept is None:
        intercept = any(np.all(X[:, j] == X[0, j]) and X[0, j] != 0 for j in range(k))

    Q, R = np.linalg.qr(X)
    coef = np.linalg.solve(R, Q.T @ y)
    fitted = X @ coef
    resid = y - fitted
    ssr = float(resid @ resid)
    df_resid = n - k
    centre = y.mean() if intercept else 0.0
    sst = float(np.sum((y - centre) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    df_model = k - 1 if intercept else k
    denom = n - 1 if intercept else n
    adj = 1.0 - (1.0 - r2) * denom / df_resid
    sigma2 = ssr / df_resid
    Rinv = np.linalg.inv(R)
    cov = sigma2 * (Rinv @ Rinv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    p = 2.0 * stats.t.sf(np.abs(t), df_resid)
    if df_model > 0 and ssr > 0:
        f = ((sst - ssr) / df_model) / (ssr / df_resid)
        fp = float(stats.f.sf(f, df_model, df_resid))
    else:
        f, fp = (math.inf, 0.0) if ssr == 0 else (math.nan, math.nan)
    jb = jarque_bera(resid)
    dw = durbin_watson(resid) if ssr > 0 else math.nan
    return OLSReport(names, coef, se, t, np.nan_to_num(p, nan=1.0), float(r2), float(adj),
                     float(f), fp, jb, dw, resid, fitted, n, df_resid, response, cov)


def fit_ols(spec: OLSSpec, data: FeatureMatrix) -> OLSReport:
    """Fit ``spec`` on named columns of ``data``."""
    X = spec.design(data)
    try:
        y = data.column(spec.response)
    except ValueError:
        raise GridtraceError("bad-spec", f"response {spec.response!r} not in data") from None
    return ols_matrix(X, y, spec.labels, spec.has_intercept, spec.response)
