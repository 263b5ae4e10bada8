"""Gaussian mixture generalization of pooled letter demonstrations.

Fits a K-component 2D Gaussian mixture to the points of several recorded
demonstrations by expectation-maximization, then reads a generalized curve
off the ordered component means.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .trajectory import Trajectory, cumulative_arclength, resample_by_arclength

FORMAT_NAME = "glyphtrace.gmm"
FORMAT_VERSION = 1

DEFAULT_K = 10
DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-8
DEFAULT_RESAMPLE = 100
VARIANCE_FLOOR_FRACTION = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


class GmmError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class GmmModel:
    """Mixture of ``k`` bivariate normals stored as stacked arrays."""

    weights: np.ndarray      # (k,)
    means: np.ndarray        # (k, 2)
    covariances: np.ndarray  # (k, 2, 2)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        mu = np.array(self.means, dtype=float)
        cov = np.array(self.covariances, dtype=float)
        if w.ndim != 1 or len(w) < 1:
            raise GmmError("a mixture needs at least one component")
        k = len(w)
        if mu.shape != (k, 2) or cov.shape != (k, 2, 2):
            raise GmmError(f"inconsistent shapes: weights {w.shape}, means {mu.shape}, "
                           f"covariances {cov.shape}")
        for arr, name in ((w, "weights"), (mu, "means"), (cov, "covariances")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def components(self) -> list[GaussianComponent]:
        return [GaussianComponent(float(w), m, c)
                for w, m, c in zip(self.weights, self.means, self.covariances)]

    def __eq__(self, other):
        if not isinstance(other, GmmModel):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.covariances, other.covariances))

    __hash__ = None


@dataclass
class FitReport:
    log_likelihood_trace: list[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False


def _as_points(points) -> np.ndarray:
    if isinstance(points, Trajectory):
        points = points.points
    X = np.asarray(points, dtype=float)
    if X.size == 0:
        return X.reshape(0, 2)
    if X.ndim != 2 or X.shape[1] != 2:
        raise GmmError(f"expected (n, 2) points, got shape {X.shape}")
    return X


def _component_log_density(X: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """``log N(x | mean_j, cov_j)`` for every point and component, shape (n, k)."""
    a, b, d = covs[:, 0, 0], covs[:, 0, 1], covs[:, 1, 1]
    det = a * d - b * b
    dx = X[:, None, 0] - means[None, :, 0]
    dy = X[:, None, 1] - means[None, :, 1]
    maha = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det
    return -_LOG_2PI - 0.5 * np.log(det) - 0.5 * maha


def _weighted_log_joint(model: GmmModel, X: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    return _component_log_density(X, model.means, model.covariances) + log_w


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    peak = a.max(axis=1)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    return peak + np.log(np.exp(a - peak[:, None]).sum(axis=1))


def log_likelihood(model: GmmModel, points) -> float:
    """Sum over points of the log mixture density (log-sum-exp stabilized)."""
    X = _as_points(points)
    if len(X) == 0:
        return 0.0
    return float(_logsumexp_rows(_weighted_log_joint(model, X)).sum())


def responsibilities(model: GmmModel, points) -> np.ndarray:
    """E-step posteriors, shape (n, k); each row sums to one."""
    X = _as_points(points)
    joint = _weighted_log_joint(model, X)
    return np.exp(joint - _logsumexp_rows(joint)[:, None])


def _clamp_covariance(cov: np.ndarray, floor: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def _kmeanspp(X: np.ndarray, counts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # draws are proportional to multiplicity so duplicated input gives the same picks
    def draw(p):
        c = np.cumsum(p)
        return min(int(np.searchsorted(c, rng.random() * c[-1], side="right")), len(p) - 1)

    centers = [X[draw(counts)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        p = counts * d2
        if p.sum() <= 0.0:
            raise GmmError(f"only {len(centers)} distinct points available for k={k}")
        centers.append(X[draw(p)])
        d2 = np.minimum(d2, ((X - centers[-1]) ** 2).sum(axis=1))
    return np.array(centers)


def fit_gmm(points, k: int = DEFAULT_K, seed: int = 0, max_iter: int = DEFAULT_MAX_ITER,
            tol: float = DEFAULT_TOL,
            on_iteration: Callable[[GmmModel, np.ndarray], None] | None = None,
            ) -> tuple[GmmModel, FitReport]:
    """Fit a ``k``-component mixture by expectation-maximization.

    Identical points are merged and carried as integer multiplicities, which
    is the same EM problem as the raw pooled data.  Means are seeded by
    k-means++ from ``seed``; covariances start at the global data variance
    times identity; weights start uniform.  Every covariance is eigenvalue
    clamped to ``1e-6`` times the global variance.

    EM stops once the per-point log-likelihood improves by less than ``tol``
    or after ``max_iter`` M-steps.  ``on_iteration(model, resp)`` is called
    after every M-step with the new model and the responsibilities that
    produced it.
    """
    X_all = _as_points(points)
    if k < 1:
        raise GmmError("k must be positive")
    if len(X_all) < k:
        raise GmmError(f"k={k} exceeds the number of points ({len(X_all)})")
    X, counts = np.unique(X_all, axis=0, return_counts=True)
    counts = counts.astype(float)
    if len(X) == 1:
        raise GmmError("degenerate input: all points are identical")

    total = counts.sum()
    center = counts @ X / total
    global_var = float((counts @ ((X - center) ** 2)).sum() / total / 2.0)
    floor = VARIANCE_FLOOR_FRACTION * global_var

    rng = np.random.default_rng(seed)
    model = GmmModel(
        weights=np.full(k, 1.0 / k),
        means=_kmeanspp(X, counts, k, rng),
        covariances=np.repeat((global_var * np.eye(2))[None], k, axis=0),
    )

    report = FitReport()
    prev = -math.inf
    for _ in range(max_iter + 1):
        joint = _weighted_log_joint(model, X)
        lse = _logsumexp_rows(joint)
        ll = float(counts @ lse)
        report.log_likelihood_trace.append(ll)
        if (ll - prev) / total < tol:
            report.converged = True
            break
        if report.iterations_run == max_iter:
            break
        prev = ll

        resp = np.exp(joint - lse[:, None])
        wr = resp * counts[:, None]
        nk = np.maximum(wr.sum(axis=0), np.finfo(float).tiny)
        means = (wr.T @ X) / nk[:, None]
        covs = np.empty((k, 2, 2))
        for j in range(k):
            diff = X - means[j]
            covs[j] = _clamp_covariance((wr[:, j, None] * diff).T @ diff / nk[j], floor)
        model = GmmModel(weights=nk / total, means=means, covariances=covs)
        report.iterations_run += 1
        if on_iteration is not None:
            on_iteration(model, resp)

    return model, report


def variance_floor(points) -> float:
    """The covariance eigenvalue floor :func:`fit_gmm` applies for ``points``."""
    X = _as_points(points)
    return VARIANCE_FLOOR_FRACTION * float(X.var(axis=0).mean())


def extract_generalized_curve(model: GmmModel, reference: Trajectory) -> Trajectory:
    """Order the component means along ``reference`` and return them as a curve.

    Each mean takes the arc-length fraction of its nearest reference sample.
    Means are sorted by that fraction; equal fractions fall back to the mean
    coordinates, so the result does not depend on component order.
    """
    if model.k < 2:
        raise GmmError("degenerate curve: at least 2 components are needed")
    ref = reference.points[:, :2]
    s = cumulative_arclength(ref)
    if s[-1] <= 0.0:
        raise GmmError("reference trajectory has zero length")
    frac = s / s[-1]
    d2 = ((model.means[:, None, :] - ref[None, :, :]) ** 2).sum(axis=2)
    nearest = d2.argmin(axis=1)
    key = frac[nearest]
    order = np.lexsort((model.means[:, 1], model.means[:, 0], key))
    return Trajectory(model.means[order], sample_rate_hz=reference.sample_rate_hz,
                      label="generalized")


def pool_demonstrations(demonstrations: Sequence[Trajectory], m: int = DEFAULT_RESAMPLE,
                        ) -> tuple[np.ndarray, list[Trajectory]]:
    resampled = [resample_by_arclength(d, m) for d in demonstrations]
    return np.vstack([r.points[:, :2] for r in resampled]), resampled


def generalize_letter(demonstrations: Sequence[Trajectory], k: int = DEFAULT_K, seed: int = 0,
                      m: int = DEFAULT_RESAMPLE, max_iter: int = DEFAULT_MAX_ITER,
                      tol: float = DEFAULT_TOL) -> Trajectory:
    """Pool resampled demonstrations, fit a mixture and return the ordered means."""
    if not demonstrations:
        raise GmmError("no demonstrations given")
    pooled, resampled = pool_demonstrations(demonstrations, m)
    model, _ = fit_gmm(pooled, k=k, seed=seed, max_iter=max_iter, tol=tol)
    return extract_generalized_curve(model, resampled[0])


def dump_gmm(model: GmmModel) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "k": model.k,
        "weights": model.weights.tolist(),
        "means": model.means.tolist(),
        "covariances": model.covariances.tolist(),
    }
    return json.dumps(doc, indent=2) + "\n"


def load_gmm(text: str) -> GmmModel:
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME:
        raise GmmError(f"not a mixture model file (format={doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise GmmError(f"unsupported model version {doc.get('version')!r}")
    model = GmmModel(doc["weights"], doc["means"], doc["covariances"])
    if model.k != doc["k"]:
        raise GmmError("component count does not match the stored k")
    return model
