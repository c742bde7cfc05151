"""Exact zero-mean Gaussian-process regression with an ARD squared-exponential kernel.

Hyperparameters live in log space during optimisation; the parameter
vector is ordered ``[log signal_sd, log lengthscale_1..D, log noise_sd]``.
Targets and inputs are standardised before fitting, so every
hyperparameter stored on a :class:`TrainedGp` is in standardised units.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.linalg.lapack import dpotri

from .errors import ConditioningError, FitError, InputError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
LOG_2PI = math.log(2.0 * math.pi)
# jitter tried as a fraction of the mean diagonal: 1e-10, 1e-9, ..., 1e-4
JITTER_EXPONENTS = range(-10, -3)
NEGATIVE_VARIANCE_TOL = -1e-10
_PREDICT_CHUNK = 2048

_clamped_variances = 0


def clamped_variance_count() -> int:
    """Number of predictive variances clamped to zero since import."""
    return _clamped_variances


@dataclass(frozen=True)
class GpHyperparams:
    signal_sd: float
    lengthscales: np.ndarray
    noise_sd: float

    def __post_init__(self):
        ls = np.array(self.lengthscales, dtype=float).reshape(-1)
        if ls.size == 0:
            raise InputError("at least one lengthscale is required")
        if not (self.signal_sd > 0 and self.noise_sd > 0 and np.all(ls > 0)):
            raise InputError("GP hyperparameters must be strictly positive")
        ls.flags.writeable = False
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_sd", float(self.signal_sd))
        object.__setattr__(self, "noise_sd", float(self.noise_sd))

    @property
    def n_dims(self) -> int:
        return self.lengthscales.size

    def to_log(self) -> np.ndarray:
        return np.concatenate(([math.log(self.signal_sd)], np.log(self.lengthscales),
                               [math.log(self.noise_sd)]))

    @classmethod
    def from_log(cls, theta) -> "GpHyperparams":
        theta = np.asarray(theta, dtype=float)
        return cls(math.exp(theta[0]), np.exp(theta[1:-1]), math.exp(theta[-1]))

    @classmethod
    def default(cls, n_dims: int) -> "GpHyperparams":
        return cls(1.0, np.ones(n_dims), 0.1)

    def to_dict(self) -> dict:
        return {"signal_sd": self.signal_sd, "lengthscales": self.lengthscales.tolist(),
                "noise_sd": self.noise_sd}

    @classmethod
    def from_dict(cls, data: dict) -> "GpHyperparams":
        return cls(data["signal_sd"], data["lengthscales"], data["noise_sd"])


def se_kernel(x, x2, hp: GpHyperparams) -> float:
    """Squared-exponential covariance between two input vectors."""
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x.size != hp.n_dims or x2.size != hp.n_dims:
        raise InputError(f"inputs of dimension {x.size}, {x2.size} do not match {hp.n_dims} lengthscales")
    r = (x - x2) / hp.lengthscales
    return hp.signal_sd ** 2 * math.exp(-0.5 * float(r @ r))


def se_gram(X1, X2, hp: GpHyperparams) -> np.ndarray:
    """Kernel matrix ``K[a, b] = k(X1[a], X2[b])`` (no noise term)."""
    X1 = _as_2d(X1, hp.n_dims)
    X2 = _as_2d(X2, hp.n_dims)
    A = X1 / hp.lengthscales
    B = X2 / hp.lengthscales
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return hp.signal_sd ** 2 * np.exp(-0.5 * sq)


def _as_2d(X, n_dims) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if n_dims == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_dims:
        raise InputError(f"expected inputs with {n_dims} columns, got shape {X.shape}")
    return X


def stable_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Returns ``(L, jitter)`` where ``jitter`` is the absolute amount added to
    the diagonal (0.0 when none was needed).
    """
    try:
        return cholesky(K, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    scale = float(np.mean(np.diag(K)))
    jitter = 0.0
    for e in JITTER_EXPONENTS:
        jitter = scale * 10.0 ** e
        try:
            L = cholesky(K + jitter * np.eye(K.shape[0]), lower=True, check_finite=False)
        except LinAlgError:
            continue
        log.debug("cholesky needed jitter %.3g", jitter)
        return L, jitter
    raise ConditioningError(
        f"Cholesky failed after jitter escalation up to {jitter:.3g} (1e-4 of mean diagonal)",
        jitter=jitter,
    )


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    return diff * diff


def log_marginal_likelihood(X, y, hp: GpHyperparams, gradient: bool = True):
    """Exact log marginal likelihood and its gradient in log-hyperparameters.

    Returns ``(value, grad)``; ``grad`` is ``None`` when ``gradient`` is
    false. The gradient follows the trace identity
    ``0.5 * tr((a a^T - K^-1) dK/dtheta)``.
    """
    X = _as_2d(X, hp.n_dims)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    if n < 1 or X.shape[0] != n:
        raise InputError("X and y must have the same, non-zero number of rows")
    Kf = se_gram(X, X, hp)
    noise_var = hp.noise_sd ** 2
    K = Kf.copy()
    K[np.diag_indices(n)] += noise_var
    L, _ = stable_cholesky(K)
    alpha = cho_solve((L, True), y, check_finite=False)
    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI
    if not gradient:
        return value, None

    Kinv, info = dpotri(L, lower=1)
    if info != 0:
        raise ConditioningError(f"dpotri failed with info={info}")
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    W = np.outer(alpha, alpha) - Kinv
    A = W * Kf
    grad = np.empty(hp.n_dims + 2)
    grad[0] = float(np.sum(A))
    for d in range(hp.n_dims):
        grad[1 + d] = 0.5 * float(np.sum(A * _pairwise_sq(X[:, d]))) / hp.lengthscales[d] ** 2
    grad[-1] = noise_var * float(np.trace(W))
    return value, grad


@dataclass(frozen=True)
class Standardization:
    x_mean: np.ndarray
    x_sd: np.ndarray
    y_mean: float
    y_sd: float

    @classmethod
    def from_data(cls, X: np.ndarray, y: np.ndarray) -> "Standardization":
        x_sd = X.std(axis=0)
        x_sd = np.where(x_sd > 0, x_sd, 1.0)
        y_sd = float(y.std())
        return cls(X.mean(axis=0), x_sd, float(y.mean()), y_sd if y_sd > 0 else 1.0)

    def x(self, X):
        return (X - self.x_mean) / self.x_sd

    def x_inverse(self, Xs):
        return Xs * self.x_sd + self.x_mean

    def y(self, y):
        return (y - self.y_mean) / self.y_sd

    def y_inverse(self, ys):
        return ys * self.y_sd + self.y_mean

    def to_dict(self) -> dict:
        return {"x_mean": self.x_mean.tolist(), "x_sd": self.x_sd.tolist(),
                "y_mean": self.y_mean, "y_sd": self.y_sd}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardization":
        return cls(np.asarray(data["x_mean"], dtype=float), np.asarray(data["x_sd"], dtype=float),
                   float(data["y_mean"]), float(data["y_sd"]))


@dataclass(frozen=True)
class FitOptions:
    """Settings for :func:`fit`.

    ``n_restarts`` counts starting points: the first is the supplied
    initial guess, the others are log-uniform draws from ``start_box``.
    ``max_opt_points`` caps the number of rows used while searching for
    hyperparameters (a seeded random subset); the final model always
    conditions on every row.
    """

    optimize: bool = True
    n_restarts: int = 5
    max_iter: int = 200
    ftol: float = 1e-6
    gtol: float = 1e-5
    seed: int = 0
    max_opt_points: int | None = None
    signal_bounds: tuple[float, float] = (1e-3, 1e2)
    lengthscale_bounds: tuple[float, float] = (1e-2, 1e3)
    noise_bounds: tuple[float, float] = (1e-4, 1e1)
    start_box: dict = field(default_factory=lambda: {
        "signal_sd": (0.3, 3.0), "lengthscales": (0.1, 10.0), "noise_sd": (0.01, 0.5)})

    def log_bounds(self, n_dims: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.log([self.signal_bounds[0]] + [self.lengthscale_bounds[0]] * n_dims + [self.noise_bounds[0]])
        hi = np.log([self.signal_bounds[1]] + [self.lengthscale_bounds[1]] * n_dims + [self.noise_bounds[1]])
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "optimize": self.optimize, "n_restarts": self.n_restarts, "max_iter": self.max_iter,
            "ftol": self.ftol, "gtol": self.gtol, "seed": self.seed,
            "max_opt_points": self.max_opt_points,
            "signal_bounds": list(self.signal_bounds),
            "lengthscale_bounds": list(self.lengthscale_bounds),
            "noise_bounds": list(self.noise_bounds),
            "start_box": {k: list(v) for k, v in self.start_box.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitOptions":
        data = dict(data)
        for key in ("signal_bounds", "lengthscale_bounds", "noise_bounds"):
            if key in data:
                data[key] = tuple(data[key])
        if "start_box" in data:
            data["start_box"] = {k: tuple(v) for k, v in data["start_box"].items()}
        return cls(**data)


@dataclass(frozen=True)
class RestartResult:
    index: int
    log_likelihood: float
    n_iter: int
    theta: np.ndarray | None
    failed: bool = False


@dataclass(frozen=True)
class TrainedGp:
    """A conditioned GP. ``X`` is kept in original units, ``y`` standardised."""

    hyperparams: GpHyperparams
    X: np.ndarray
    y: np.ndarray
    standardization: Standardization
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0
    log_likelihood: float = float("nan")
    n_iter: tuple = ()
    best_restart: int = -1

    @property
    def n_dims(self) -> int:
        return self.X.shape[1]

    @property
    def n_train(self) -> int:
        return self.X.shape[0]

    def original_units(self) -> GpHyperparams:
        """Hyperparameters mapped back to the units of the raw data."""
        st = self.standardization
        hp = self.hyperparams
        return GpHyperparams(hp.signal_sd * st.y_sd, hp.lengthscales * st.x_sd, hp.noise_sd * st.y_sd)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "hyperparams": self.hyperparams.to_dict(),
            "standardization": self.standardization.to_dict(),
            "X": self.X.tolist(),
            "y_standardized": self.y.tolist(),
            "jitter": self.jitter,
            "log_likelihood": self.log_likelihood,
            "n_iter": list(self.n_iter),
            "best_restart": self.best_restart,
            "alpha_checksum": _checksum(self.alpha),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedGp":
        if data.get("format_version") != FORMAT_VERSION:
            raise InputError(f"unsupported GP model format version {data.get('format_version')!r}")
        hp = GpHyperparams.from_dict(data["hyperparams"])
        st = Standardization.from_dict(data["standardization"])
        X = np.asarray(data["X"], dtype=float).reshape(-1, hp.n_dims)
        ys = np.asarray(data["y_standardized"], dtype=float)
        gp = _condition(X, ys, st, hp, jitter=float(data.get("jitter", 0.0)),
                        log_likelihood=float(data.get("log_likelihood", float("nan"))),
                        n_iter=tuple(data.get("n_iter", ())), best_restart=int(data.get("best_restart", -1)))
        stored = data.get("alpha_checksum")
        if stored is not None:
            now = _checksum(gp.alpha)
            for key in ("sum", "norm"):
                if abs(now[key] - stored[key]) > 1e-10 * max(1.0, abs(stored[key])):
                    raise InputError(f"model alpha checksum mismatch ({key}: {now[key]!r} vs {stored[key]!r})")
        return gp


def _checksum(alpha: np.ndarray) -> dict:
    return {"sum": float(np.sum(alpha)), "norm": float(np.linalg.norm(alpha))}


def _condition(X, ys, st, hp, jitter=None, **extra) -> TrainedGp:
    """Factorise the Gram matrix on standardised inputs and bundle a TrainedGp.

    ``jitter=None`` escalates jitter as needed; a number reuses exactly that amount.
    """
    Xs = st.x(X)
    K = se_gram(Xs, Xs, hp)
    K[np.diag_indices_from(K)] += hp.noise_sd ** 2
    if jitter is None:
        L, jitter = stable_cholesky(K)
    else:
        if jitter:
            K[np.diag_indices_from(K)] += jitter
        try:
            L = cholesky(K, lower=True, check_finite=False)
        except LinAlgError as exc:
            raise ConditioningError(f"stored jitter {jitter:.3g} no longer suffices", jitter) from exc
    alpha = cho_solve((L, True), ys, check_finite=False)
    for a in (X, ys, L, alpha):
        a.flags.writeable = False
    return TrainedGp(hp, X, ys, st, L, alpha, jitter, **extra)


def _project(theta, lo, hi):
    return np.minimum(np.maximum(theta, lo), hi)


def _ascend(X, y, theta0, lo, hi, opts: FitOptions) -> tuple[np.ndarray, float, int]:
    """Projected gradient ascent with Armijo backtracking.

    Trial steps use the Barzilai-Borwein length from the previous
    iteration; the line search halves the step until sufficient increase.
    """
    def objective(theta):
        return log_marginal_likelihood(X, y, GpHyperparams.from_log(theta))

    theta = _project(theta0, lo, hi)
    f, g = objective(theta)
    step = 1.0 / max(1.0, float(np.max(np.abs(g))))
    n_iter = 0
    for n_iter in range(1, opts.max_iter + 1):
        pg = _project(theta + g, lo, hi) - theta
        if float(np.max(np.abs(pg))) < opts.gtol:
            break
        t = step
        while True:
            cand = _project(theta + t * g, lo, hi)
            move = cand - theta
            try:
                fc, gc = objective(cand)
            except ConditioningError:
                fc, gc = -np.inf, None
            if np.isfinite(fc) and fc >= f + 1e-4 * float(g @ move):
                break
            t *= 0.5
            if t < 1e-14:
                return theta, f, n_iter
        s, yk = move, gc - g
        sy = float(s @ yk)
        step = float(np.clip(-float(s @ s) / sy, 1e-10, 1e4)) if sy < 0 else 2.0 * t
        done = abs(fc - f) < opts.ftol * (1.0 + abs(f))
        theta, f, g = cand, fc, gc
        if done:
            break
    return theta, f, n_iter


def _start_points(n_dims: int, init: GpHyperparams, opts: FitOptions, rng) -> list[np.ndarray]:
    starts = [init.to_log()]
    box = opts.start_box
    for _ in range(max(opts.n_restarts, 1) - 1):
        sf = rng.uniform(*np.log(box["signal_sd"]))
        ls = rng.uniform(*np.log(box["lengthscales"]), size=n_dims)
        sn = rng.uniform(*np.log(box["noise_sd"]))
        starts.append(np.concatenate(([sf], ls, [sn])))
    return starts


def fit(X, y, init: GpHyperparams | None = None, opts: FitOptions | None = None) -> TrainedGp:
    """Standardise the data and fit hyperparameters by maximum marginal likelihood.

    With ``opts.optimize`` false the initial hyperparameters are used as
    given (in standardised units) and the GP is only conditioned.

    Raises
    ------
    FitError
        Fewer than two rows when optimising, or every restart failed.
    """
    opts = opts or FitOptions()
    X = np.array(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.array(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size or y.size == 0:
        raise InputError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("training data must be finite")
    n, n_dims = X.shape
    init = init or GpHyperparams.default(n_dims)
    if init.n_dims != n_dims:
        raise InputError(f"initial hyperparameters have {init.n_dims} lengthscales, data has {n_dims} columns")
    st = Standardization.from_data(X, y)
    Xs, ys = st.x(X), st.y(y)

    if not opts.optimize:
        return _condition(X, ys, st, init)
    if n < 2:
        raise FitError(f"hyperparameter optimisation needs at least 2 points, got {n}")

    rng = np.random.default_rng(opts.seed)
    if opts.max_opt_points is not None and n > opts.max_opt_points:
        idx = np.sort(rng.choice(n, size=opts.max_opt_points, replace=False))
        Xo, yo = Xs[idx], ys[idx]
    else:
        Xo, yo = Xs, ys
    lo, hi = opts.log_bounds(n_dims)

    results = []
    for k, theta0 in enumerate(_start_points(n_dims, init, opts, rng)):
        try:
            theta, value, n_iter = _ascend(Xo, yo, theta0, lo, hi, opts)
        except ConditioningError as exc:
            log.warning("restart %d failed: %s", k, exc)
            results.append(RestartResult(k, -np.inf, 0, None, failed=True))
            continue
        log.debug("restart %d: lml=%.6g after %d iterations", k, value, n_iter)
        results.append(RestartResult(k, value, n_iter, theta))

    ok = [r for r in results if not r.failed]
    if not ok:
        raise FitError("all optimiser restarts failed to condition the kernel matrix")
    # ties resolved by restart index
    best = max(ok, key=lambda r: (r.log_likelihood, -r.index))
    hp = GpHyperparams.from_log(best.theta)
    try:
        return _condition(X, ys, st, hp, log_likelihood=best.log_likelihood,
                          n_iter=tuple(r.n_iter for r in results), best_restart=best.index)
    except ConditioningError as exc:
        raise FitError(f"optimised hyperparameters cannot condition the full data set: {exc}") from exc


def predict(gp: TrainedGp, Xstar) -> tuple[np.ndarray, np.ndarray]:
    """Latent predictive mean and variance, in original target units.

    Variances that come out negative through round-off are clamped to
    zero; values below ``-1e-10`` (standardised) are also counted and logged.
    """
    global _clamped_variances
    Xstar = _as_2d(Xstar, gp.n_dims)
    st, hp = gp.standardization, gp.hyperparams
    Xtr = st.x(gp.X)
    m = Xstar.shape[0]
    mean = np.empty(m)
    var = np.empty(m)
    for a in range(0, m, _PREDICT_CHUNK):
        b = min(a + _PREDICT_CHUNK, m)
        Ks = se_gram(st.x(Xstar[a:b]), Xtr, hp)
        mean[a:b] = Ks @ gp.alpha
        v = solve_triangular(gp.chol, Ks.T, lower=True, check_finite=False)
        var[a:b] = hp.signal_sd ** 2 - np.sum(v * v, axis=0)
    bad = var < NEGATIVE_VARIANCE_TOL
    if np.any(bad):
        _clamped_variances += int(bad.sum())
        log.warning("clamped %d negative predictive variances (min %.3g)", int(bad.sum()), var.min())
    np.maximum(var, 0.0, out=var)
    return st.y_inverse(mean), var * st.y_sd ** 2
