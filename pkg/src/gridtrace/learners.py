"""Small parametric learners used by the baseline and study code.

Ridge regression (squared or pinball loss), a feed-forward tanh network, an
ARMA model estimated by conditional sum of squares, time-ordered grid search,
and JSON round-tripping of every fitted model.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize, signal

from .errors import FileIOError, GridtraceError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
QUANTILE_LEVELS = (0.10, 0.25, 0.50, 0.75, 0.90)

# Huberized pinball smoothing schedule for the IRLS quantile fit.
IRLS_EPS = (1e-6, 1e-7, 1e-8, 1e-9)
IRLS_TOL = 1e-8


@dataclass(frozen=True)
class LossKind:
    """``squared`` or ``pinball`` at level ``q`` in (0, 1)."""

    kind: str = "squared"
    q: float | None = None

    def __post_init__(self):
        if self.kind not in ("squared", "pinball"):
            raise GridtraceError("bad-loss", f"unknown loss {self.kind!r}")
        if self.kind == "pinball" and not (self.q is not None and 0.0 < self.q < 1.0):
            raise GridtraceError("bad-loss", "pinball level must lie strictly in (0, 1)")

    @classmethod
    def pinball(cls, q: float) -> "LossKind":
        return cls("pinball", float(q))

    def __call__(self, y, yhat) -> float:
        """Mean loss over a sample."""
        y, yhat = np.asarray(y, float), np.asarray(yhat, float)
        if self.kind == "squared":
            return float(np.mean((y - yhat) ** 2))
        return float(np.mean(pinball(y, yhat, self.q)))


SQUARED = LossKind()


def pinball(y, yhat, q: float):
    """Pinball (quantile) loss; elementwise for arrays."""
    if not 0.0 < q < 1.0:
        raise GridtraceError("bad-loss", "pinball level must lie strictly in (0, 1)")
    diff = np.asarray(y, float) - np.asarray(yhat, float)
    out = np.where(diff >= 0, q * diff, (q - 1.0) * diff)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FeatureMatrix:
    """Rectangular design with named columns and optional row timestamps."""

    values: np.ndarray
    names: tuple = ()
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise GridtraceError("bad-shape", "feature matrix must be 2-D")
        if not np.all(np.isfinite(vals)):
            raise GridtraceError("non-finite", "feature matrix contains missing or infinite values")
        names = tuple(self.names) or tuple(f"x{i}" for i in range(vals.shape[1]))
        if len(names) != vals.shape[1]:
            raise GridtraceError("bad-shape", f"{len(names)} names for {vals.shape[1]} columns")
        if len(set(names)) != len(names):
            raise GridtraceError("bad-shape", "duplicate feature names")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps).astype("datetime64[h]")
            if ts.size != vals.shape[0]:
                raise GridtraceError("misaligned", "timestamps do not match rows")
            object.__setattr__(self, "timestamps", ts)

    @property
    def shape(self):
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def rows(self, mask) -> "FeatureMatrix":
        ts = None if self.timestamps is None else self.timestamps[mask]
        return FeatureMatrix(self.values[mask], self.names, ts)


def _as_matrix(X) -> np.ndarray:
    return X.values if isinstance(X, FeatureMatrix) else np.atleast_2d(np.asarray(X, float).T).T


@dataclass(frozen=True)
class LearnerSpec:
    """Hyper-parameters of one learner.

    ``kind`` is ``"ridge"``, ``"mlp"`` or ``"arma"``; only the fields of that
    kind matter.
    """

    kind: str = "ridge"
    lam: float = 0.0
    hidden: tuple = (16,)
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 64
    seed: int = DEFAULT_SEED
    order: tuple = (1, 0, 0)
    loss: LossKind = SQUARED

    def __post_init__(self):
        if self.kind not in ("ridge", "mlp", "arma"):
            raise GridtraceError("bad-spec", f"unknown learner {self.kind!r}")
        if self.lam < 0:
            raise GridtraceError("bad-spec", "ridge penalty must be >= 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "order", tuple(int(o) for o in self.order))
        if any(h <= 0 for h in self.hidden):
            raise GridtraceError("bad-spec", "hidden sizes must be positive")
        # zero epochs is allowed: the model keeps its initial weights
        if self.epochs < 0 or self.batch_size < 1:
            raise GridtraceError("bad-spec", "epochs must be >= 0 and batch size >= 1")
        if len(self.order) != 3 or min(self.order) < 0:
            raise GridtraceError("bad-spec", "ARMA order must be three non-negative integers")

    def with_loss(self, loss: LossKind) -> "LearnerSpec":
        return replace(self, loss=loss)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["order"] = list(self.order)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        d = dict(d)
        d["loss"] = LossKind(**d["loss"]) if isinstance(d.get("loss"), dict) else d.get("loss", SQUARED)
        d["hidden"] = tuple(d.get("hidden", (16,)))
        d["order"] = tuple(d.get("order", (1, 0, 0)))
        return cls(**d)


# --------------------------------------------------------------------------
# ridge / linear quantile regression


@dataclass
class RidgeModel:
    coef: np.ndarray
    intercept: float
    spec: LearnerSpec
    names: tuple = ()
    meta: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        return _as_matrix(X) @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {"model": "ridge", "spec": self.spec.to_dict(), "names": list(self.names),
                "coef": self.coef.tolist(), "intercept": self.intercept, "meta": self.meta}


def _check_xy(X, y):
    A = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if A.shape[0] != y.size:
        raise GridtraceError("misaligned", f"{A.shape[0]} rows vs {y.size} targets")
    if not np.all(np.isfinite(y)):
        raise GridtraceError("non-finite", "targets contain missing values")
    return A, y


def _solve_penalized(A1: np.ndarray, rhs: np.ndarray, weights: np.ndarray, lam: float):
    """Solve (A1' W A1 + lam * P) b = rhs, P penalizing all but column 0."""
    G = A1.T @ (A1 * weights[:, None])
    if lam > 0:
        G[1:, 1:] += lam * np.eye(G.shape[0] - 1)
    try:
        return np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        raise NumericalError("singular", "normal equations are singular") from None


def _quantile_objective(A1, y, beta, q, lam):
    r = y - A1 @ beta
    return float(np.sum(np.where(r >= 0, q * r, (q - 1.0) * r)) + lam * beta[1:] @ beta[1:])


def _quantile_irls(A1: np.ndarray, y: np.ndarray, q: float, lam: float,
                   max_iter: int = 20000):
    """Linear quantile regression by IRLS on a Huberized pinball loss.

    Each step minimizes the quadratic majorizer of the smoothed loss, so the
    smoothed objective never increases. The smoothing is annealed through
    ``IRLS_EPS``; at ``lam == 0`` the result is snapped to the best nearby
    vertex (a fit interpolating ``p`` observations), which is where the exact
    optimum lives.
    """
    n, p = A1.shape
    beta = np.linalg.lstsq(A1, y, rcond=None)[0]
    shift = (q - 0.5) * A1.sum(axis=0)
    converged = False
    iters = 0
    for eps in IRLS_EPS:
        converged = False
        for _ in range(max_iter):
            iters += 1
            r = y - A1 @ beta
            w = 0.5 / np.maximum(np.abs(r), eps)
            new = _solve_penalized(A1, A1.T @ (w * y) + shift, w, lam)
            step = np.max(np.abs(new - beta))
            beta = new
            if step <= IRLS_TOL * (1.0 + np.max(np.abs(beta))):
                converged = True
                break
    if not converged:
        raise NumericalError("no-converge", f"quantile IRLS did not settle in {iters} steps")
    if lam == 0 and n >= p:
        beta = _vertex_polish(A1, y, beta, q)
    return beta, iters


def _vertex_polish(A1, y, beta, q, spare: int = 3):
    """Try exact fits through the observations with the smallest residuals."""
    best = _quantile_objective(A1, y, beta, q, 0.0)
    r = np.abs(y - A1 @ beta)
    near = np.argsort(r, kind="stable")[: A1.shape[1] + spare]
    for combo in itertools.combinations(near, A1.shape[1]):
        sub = A1[list(combo)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        cand = np.linalg.solve(sub, y[list(combo)])
        obj = _quantile_objective(A1, y, cand, q, 0.0)
        if obj < best:
            best, beta = obj, cand
    return beta


def fit_ridge(X, y, lam: float = 0.0, loss: LossKind = SQUARED) -> RidgeModel:
    """Linear model with an unpenalized intercept.

    Squared loss uses the closed-form ridge solution on centred data; pinball
    loss runs linear quantile regression (with the same ridge penalty).
    """
    A, y = _check_xy(X, y)
    names = X.names if isinstance(X, FeatureMatrix) else ()
    if lam < 0:
        raise GridtraceError("bad-spec", "ridge penalty must be >= 0")
    if A.shape[0] < A.shape[1]:
        raise GridtraceError("misaligned", "fewer observations than features")
    spec = LearnerSpec("ridge", lam=lam, loss=loss)
    meta = {"loss": loss.kind, "q": loss.q, "n": int(A.shape[0])}
    if loss.kind == "squared":
        xm, ym = A.mean(axis=0), y.mean()
        Xc = A - xm
        G = Xc.T @ Xc + lam * np.eye(A.shape[1])
        if lam == 0 and np.linalg.matrix_rank(Xc) < A.shape[1]:
            raise NumericalError("singular", "design is rank deficient at lam=0")
        try:
            coef = np.linalg.solve(G, Xc.T @ (y - ym))
        except np.linalg.LinAlgError:
            raise NumericalError("singular", "normal equations are singular") from None
        return RidgeModel(coef, float(ym - xm @ coef), spec, names, meta)
    A1 = np.column_stack([np.ones(A.shape[0]), A])
    if lam == 0 and np.linalg.matrix_rank(A1) < A1.shape[1]:
        raise NumericalError("singular", "design is rank deficient at lam=0")
    beta, iters = _quantile_irls(A1, y, loss.q, lam)
    meta["iterations"] = iters
    return RidgeModel(beta[1:], float(beta[0]), spec, names, meta)


# --------------------------------------------------------------------------
# feed-forward network


@dataclass
class MLPModel:
    """tanh network with a linear output; inputs and target are standardized."""

    weights: list
    biases: list
    spec: LearnerSpec
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        Z = (_as_matrix(X) - self.x_mean) / self.x_scale
        out = _mlp_forward(self.weights, self.biases, Z)[-1].ravel()
        return out * self.y_scale + self.y_mean

    def to_dict(self) -> dict:
        return {"model": "mlp", "spec": self.spec.to_dict(),
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "x_mean": self.x_mean.tolist(), "x_scale": self.x_scale.tolist(),
                "y_mean": self.y_mean, "y_scale": self.y_scale,
                "history": self.history, "meta": self.meta}


def _mlp_forward(weights, biases, Z):
    acts = [Z]
    h = Z
    for i, (W, b) in enumerate(zip(weights, biases)):
        h = h @ W + b
        if i < len(weights) - 1:
            h = np.tanh(h)
        acts.append(h)
    return acts


def _loss_grad(y, out, loss: LossKind):
    """Mean loss and its derivative with respect to the network output."""
    diff = out - y
    if loss.kind == "squared":
        return float(np.mean(diff ** 2)), 2.0 * diff / y.size
    q = loss.q
    value = float(np.mean(np.where(diff <= 0, -q * diff, (1.0 - q) * diff)))
    grad = np.where(diff > 0, 1.0 - q, np.where(diff < 0, -q, 0.0)) / y.size
    return value, grad


def mlp_loss_and_grad(weights, biases, Z, y, loss: LossKind = SQUARED):
    """Loss of the network on standardized inputs ``Z`` and its gradients.

    Returns ``(loss, dweights, dbiases)`` by backpropagation.
    """
    acts = _mlp_forward(weights, biases, Z)
    out = acts[-1].ravel()
    value, g = _loss_grad(y, out, loss)
    delta = g[:, None]
    dW, db = [None] * len(weights), [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        dW[i] = acts[i].T @ delta
        db[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (1.0 - acts[i] ** 2)
    return value, dW, db


def init_mlp(spec: LearnerSpec, n_features: int):
    """Glorot-uniform weights and zero biases drawn from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    sizes = [n_features, *spec.hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases, rng


def fit_mlp(X, y, spec: LearnerSpec = LearnerSpec("mlp"), loss: LossKind | None = None) -> MLPModel:
    """Train a tanh network by mini-batch gradient descent (Adam updates).

    Training is deterministic for a given ``spec.seed``. With pinball loss the
    subgradient is used.
    """
    A, y = _check_xy(X, y)
    loss = loss or spec.loss
    spec = replace(spec, kind="mlp", loss=loss)
    x_mean = A.mean(axis=0)
    x_scale = A.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    y_mean = float(y.mean())
    y_scale = float(y.std()) or 1.0
    Z = (A - x_mean) / x_scale
    t = (y - y_mean) / y_scale
    weights, biases, rng = init_mlp(spec, A.shape[1])

    params = weights + biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, tiny = 0.9, 0.999, 1e-8
    step = 0
    history = []
    n = Z.shape[0]
    for _ in range(spec.epochs):
        order = rng.permutation(n)
        for s in range(0, n, spec.batch_size):
            idx = order[s:s + spec.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                value, dW, db = mlp_loss_and_grad(weights, biases, Z[idx], t[idx], loss)
            if not math.isfinite(value):
                raise NumericalError("diverged", "training loss is not finite")
            step += 1
            for i, g in enumerate(dW + db):
                m[i] = beta1 * m[i] + (1 - beta1) * g
                v[i] = beta2 * v[i] + (1 - beta2) * g * g
                mhat = m[i] / (1 - beta1 ** step)
                vhat = v[i] / (1 - beta2 ** step)
                params[i] -= spec.learning_rate * mhat / (np.sqrt(vhat) + tiny)
        with np.errstate(over="ignore", invalid="ignore"):
            full, _, _ = mlp_loss_and_grad(weights, biases, Z, t, loss)
        if not math.isfinite(full):
            raise NumericalError("diverged", "training loss is not finite")
        history.append(full)
    meta = {"seed": spec.seed, "loss": loss.kind, "q": loss.q, "epochs": spec.epochs}
    return MLPModel(weights, biases, spec, x_mean, x_scale, y_mean, y_scale, history, meta)


# --------------------------------------------------------------------------
# ARMA by conditional sum of squares


def difference(x: np.ndarray, d: int) -> np.ndarray:
    for _ in range(d):
        x = np.diff(x)
    return x


def ar_spectral_radius(phi) -> float:
    phi = np.asarray(phi, float)
    if phi.size == 0:
        return 0.0
    companion = np.zeros((phi.size, phi.size))
    companion[0] = phi
    companion[1:, :-1] = np.eye(phi.size - 1)
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def _css_residuals(w: np.ndarray, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    p = phi.size
    u = w[p:].copy()
    for i, f in enumerate(phi, start=1):
        u -= f * w[p - i: w.size - i]
    if theta.size == 0:
        return u
    return signal.lfilter([1.0], np.r_[1.0, theta], u)


def css_objective(params, w, p: int) -> float:
    e = _css_residuals(w, np.asarray(params[:p]), np.asarray(params[p:]))
    value = float(e @ e)
    return value if math.isfinite(value) else 1e300


@dataclass
class ARMAModel:
    """ARIMA(p, d, q) fitted by CSS. The mean is only estimated when ``d == 0``."""

    phi: np.ndarray
    theta: np.ndarray
    mean: float
    d: int
    sigma2: float
    series: np.ndarray
    spec: LearnerSpec = field(default_factory=lambda: LearnerSpec("arma"))
    trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def order(self):
        return (self.phi.size, self.d, self.theta.size)

    def _w(self):
        return difference(self.series, self.d) - self.mean

    def residuals(self) -> np.ndarray:
        """CSS residuals aligned with the original series (NaN where undefined)."""
        e = _css_residuals(self._w(), self.phi, self.theta)
        out = np.full(self.series.size, np.nan)
        out[self.d + self.phi.size:] = e
        return out

    def fitted_values(self) -> np.ndarray:
        """One-step-ahead in-sample predictions on the original scale."""
        return self.series - self.residuals()

    def forecast(self, h: int) -> np.ndarray:
        w = self._w()
        e = _css_residuals(w, self.phi, self.theta)
        p, q = self.phi.size, self.theta.size
        w_ext = list(w)
        e_ext = [0.0] * p + list(e)
        for _ in range(h):
            val = sum(self.phi[i] * w_ext[-1 - i] for i in range(p))
            val += sum(self.theta[j] * e_ext[-1 - j] for j in range(q))
            w_ext.append(val)
            e_ext.append(0.0)
        out = np.asarray(w_ext[w.size:]) + self.mean
        # integrate d times using the last observed level of each difference
        levels = [difference(self.series, k) for k in range(self.d)]
        for k in range(self.d - 1, -1, -1):
            out = levels[k][-1] + np.cumsum(out)
        return out

    def to_dict(self) -> dict:
        return {"model": "arma", "spec": self.spec.to_dict(), "phi": self.phi.tolist(),
                "theta": self.theta.tolist(), "mean": self.mean, "d": self.d,
                "sigma2": self.sigma2, "series": self.series.tolist(), "meta": self.meta}

    def predict(self, X=None, h: int | None = None) -> np.ndarray:
        if h is None:
            h = _as_matrix(X).shape[0]
        return self.forecast(h)


def min_arma_length(p: int, q: int) -> int:
    return p + q + 3


def fit_arma_css(series, order: tuple = (1, 0, 0), maxiter: int | None = None) -> ARMAModel:
    """Estimate an ARIMA(p, d, q) model by conditional sum of squares.

    The series is differenced ``d`` times and demeaned (``d == 0`` only). AR
    coefficients start from a least-squares AR(p) fit with MA terms at zero,
    then Nelder-Mead minimizes the CSS.
    """
    p, d, q = (int(o) for o in order)
    x = np.asarray(series, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise GridtraceError("non-finite", "ARMA input contains missing values")
    w = difference(x, d)
    k = p + q + 1
    if w.size < min_arma_length(p, q):
        raise GridtraceError("short-series", f"{w.size} points after differencing for order {order}")
    if w.size < 10 * k:
        warnings.warn(f"only {w.size} points for ARMA({p},{q}); estimates will be noisy",
                      RuntimeWarning, stacklevel=2)
    mean = float(w.mean()) if d == 0 else 0.0
    wc = w - mean
    if p:
        lags = np.column_stack([wc[p - i: wc.size - i] for i in range(1, p + 1)])
        phi0 = np.linalg.lstsq(lags, wc[p:], rcond=None)[0]
    else:
        phi0 = np.zeros(0)
    x0 = np.r_[phi0, np.zeros(q)]
    trace = []
    if x0.size:
        trace.append(css_objective(x0, wc, p))
        res = optimize.minimize(
            css_objective, x0, args=(wc, p), method="Nelder-Mead",
            callback=lambda xk: trace.append(css_objective(xk, wc, p)),
            options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": maxiter or 4000 * x0.size,
                     "maxfev": 8000 * x0.size, "adaptive": x0.size > 3},
        )
        if not res.success:
            raise NumericalError("no-converge", res.message, nit=res.nit, fun=res.fun)
        params = res.x
    else:
        params = x0
    phi, theta = params[:p], params[p:]
    if ar_spectral_radius(phi) >= 1.0:
        raise NumericalError("unstable", f"AR polynomial has a root inside the unit circle: {phi}")
    e = _css_residuals(wc, phi, theta)
    sigma2 = float(e @ e / max(e.size - (p + q), 1))
    spec = LearnerSpec("arma", order=(p, d, q))
    meta = {"css": float(e @ e), "n": int(x.size), "iterations": len(trace)}
    return ARMAModel(phi, theta, mean, d, sigma2, x, spec, trace, meta)


# --------------------------------------------------------------------------
# dispatch, ensembles, grid search, serialization


def fit(spec: LearnerSpec, X, y):
    """Fit the learner described by ``spec``."""
    if spec.kind == "ridge":
        return fit_ridge(X, y, spec.lam, spec.loss)
    if spec.kind == "mlp":
        return fit_mlp(X, y, spec)
    return fit_arma_css(y, spec.order)


@dataclass
class EnsembleModel:
    """Arithmetic mean of member predictions."""

    members: list

    def __post_init__(self):
        if not self.members:
            raise GridtraceError("empty-ensemble", "an ensemble needs at least one member")

    def predict(self, X) -> np.ndarray:
        preds = [np.asarray(m.predict(X), dtype=float) for m in self.members]
        return np.mean(preds, axis=0)

    def to_dict(self) -> dict:
        return {"model": "ensemble", "members": [m.to_dict() for m in self.members]}


def _contiguous_folds(n: int, k: int):
    edges = np.linspace(0, n, k + 1).astype(int)
    return [np.arange(a, b) for a, b in zip(edges[:-1], edges[1:])]


def cross_validate(spec: LearnerSpec, X, y, k: int = 5) -> float:
    """Mean validation loss over ``k`` contiguous, time-ordered folds.

    Regression learners train on every other fold. ARMA learners train on the
    data before the fold and forecast it, so the first fold is skipped.
    """
    A, y = (None, np.asarray(y, float).ravel()) if spec.kind == "arma" and X is None else _check_xy(X, y)
    folds = _contiguous_folds(y.size, k)
    losses = []
    for i, idx in enumerate(folds):
        if spec.kind == "arma":
            if i == 0:
                continue
            model = fit_arma_css(y[: idx[0]], spec.order)
            pred = model.forecast(idx.size)
        else:
            train = np.setdiff1d(np.arange(y.size), idx)
            model = fit(spec, A[train], y[train])
            pred = model.predict(A[idx])
        losses.append(spec.loss(y[idx], pred))
    return float(np.mean(losses))


def grid_search(grid: Sequence[LearnerSpec], X, y, k: int = 5) -> LearnerSpec:
    """Spec with the lowest mean validation loss; ties go to the earliest entry."""
    if not grid:
        raise GridtraceError("empty-grid", "grid must contain at least one spec")
    if k < 2:
        raise GridtraceError("bad-folds", "need at least two folds")
    if len(grid) == 1:
        return grid[0]
    scores = []
    for spec in grid:
        try:
            scores.append(cross_validate(spec, X, y, k))
        except NumericalError as exc:
            # a candidate that cannot be fitted on some fold is out of the race
            logger.debug("grid candidate %s failed: %s", spec, exc)
            scores.append(np.inf)
    logger.debug("grid scores %s", scores)
    if not np.isfinite(scores).any():
        raise NumericalError("no-converge", "no grid candidate could be fitted")
    return grid[int(np.argmin(scores))]


def model_from_dict(d: dict):
    kind = d["model"]
    if kind == "ensemble":
        return EnsembleModel([model_from_dict(m) for m in d["members"]])
    spec = LearnerSpec.from_dict(d["spec"])
    if kind == "ridge":
        return RidgeModel(np.asarray(d["coef"], float), float(d["intercept"]), spec,
                          tuple(d.get("names", ())), d.get("meta", {}))
    if kind == "mlp":
        return MLPModel([np.asarray(w, float) for w in d["weights"]],
                        [np.asarray(b, float) for b in d["biases"]], spec,
                        np.asarray(d["x_mean"], float), np.asarray(d["x_scale"], float),
                        float(d["y_mean"]), float(d["y_scale"]), d.get("history", []),
                        d.get("meta", {}))
    if kind == "arma":
        return ARMAModel(np.asarray(d["phi"], float), np.asarray(d["theta"], float),
                         float(d["mean"]), int(d["d"]), float(d["sigma2"]),
                         np.asarray(d["series"], float), spec, [], d.get("meta", {}))
    raise GridtraceError("bad-model", f"unknown model kind {kind!r}")


def save_model(model, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(model.to_dict(), indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    return path


def load_model(path):
    try:
        return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
