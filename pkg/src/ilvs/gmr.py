"""Joint Gaussian-mixture regression for the tracking compensation term.

A mixture is fitted by EM over stacked (input, target) vectors; prediction
returns the conditional mean of the targets given an input, which yields a
smooth interpolation of the demonstrated compensation twists.  The estimator
follows the scikit-learn fit/predict API so it composes with that ecosystem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_matrix
from .errors import ModelFormatError, SingularFitError

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class TrainingSet:
    """Flattened (input, target) pairs built from a demonstration suite.

    ``inputs`` are the pseudoinverse-mapped visual errors (N, 6) and
    ``targets`` the compensation twists (N, 6); ``demo_index`` and
    ``sample_index`` keep the (demonstration, sample) provenance of each row.
    All demonstrations share ``control_gain`` and the frozen ``error_map``
    (the 6x8 goal-configuration pseudoinverse).
    """

    inputs: np.ndarray
    targets: np.ndarray
    demo_index: np.ndarray
    sample_index: np.ndarray
    control_gain: float
    error_map: np.ndarray

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if inputs.ndim != 2 or targets.shape != inputs.shape:
            raise ValueError("inputs and targets must be (N, d) arrays of equal shape")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise ValueError("training set must be finite")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "error_map", as_matrix(self.error_map, (6, 8), "error_map"))

    def __len__(self) -> int:
        return self.inputs.shape[0]


def kmeans_init(points, n_clusters: int, random_state=None,
                max_iter: int = 100, tol: float = 1e-10):
    """K-means++ seeding followed by Lloyd iterations.

    Deterministic for a given ``random_state``.  Returns (centers, labels).
    """
    x = check_array(points, dtype=float)
    n = x.shape[0]
    if n < n_clusters:
        raise ValueError(f"need at least {n_clusters} points, got {n}")
    rng = np.random.default_rng(random_state)

    centers = np.empty((n_clusters, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for k in range(1, n_clusters):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            centers[k] = x[rng.integers(n)]
            continue
        centers[k] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[k]) ** 2, axis=1))

    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dists = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dists, axis=1)
        new_centers = centers.copy()
        for k in range(n_clusters):
            members = labels == k
            if members.any():
                new_centers[k] = x[members].mean(axis=0)
        shift = np.max(np.abs(new_centers - centers))
        centers = new_centers
        if shift < tol:
            break
    return centers, labels


def _log_gaussians(x: np.ndarray, mean: np.ndarray, chol: np.ndarray,
                   log_det: float) -> np.ndarray:
    """Log density of rows of ``x`` under N(mean, chol @ chol.T)."""
    z = linalg.solve_triangular(chol, (x - mean).T, lower=True)
    return -0.5 * (x.shape[1] * _LOG_2PI + np.sum(z * z, axis=0)) - log_det


class GaussianMixtureRegression(RegressorMixin, BaseEstimator):
    """Regression through a jointly fitted Gaussian mixture.

    ``fit(X, y)`` runs EM on the stacked vectors [X | y] with full
    covariances; ``predict(X)`` returns the conditional mean of y given X,
    a responsibility-weighted blend of the per-component linear-Gaussian
    conditionals.

    Parameters
    ----------
    n_components : number of mixture components.
    tol : relative log-likelihood change that stops EM.
    reg_covar : ridge added to every covariance diagonal each M-step; keeps
        near-deterministic demonstration data from producing singular fits.
    max_iter : EM iteration cap.
    min_samples_per_component : fitting requires at least this many samples
        per component.
    random_state : seed for the k-means++ initialization.
    """

    def __init__(self, n_components=11, *, tol=1e-6, reg_covar=1e-8,
                 max_iter=500, min_samples_per_component=12, random_state=None):
        self.n_components = n_components
        self.tol = tol
        self.reg_covar = reg_covar
        self.max_iter = max_iter
        self.min_samples_per_component = min_samples_per_component
        self.random_state = random_state

    # -- fitting ---------------------------------------------------------

    def fit(self, X, y, init_centers=None):
        """Fit the joint mixture; returns self.

        ``init_centers`` optionally bypasses k-means++ with explicit initial
        component centers in the joint space (used for reproducibility
        studies and warm starts).
        """
        X = check_array(X, dtype=float)
        y = check_array(y, dtype=float)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y must have the same number of samples")
        data = np.hstack([X, y])
        n, d = data.shape
        k = int(self.n_components)
        if k < 1:
            raise ValueError("n_components must be >= 1")
        if n < k * self.min_samples_per_component:
            raise ValueError(
                f"{n} samples cannot support {k} components "
                f"(need {self.min_samples_per_component} per component)")
        if np.all(np.ptp(data, axis=0) == 0.0):
            raise SingularFitError("all training samples are identical")

        if init_centers is None:
            centers, labels = kmeans_init(data, k, self.random_state)
        else:
            centers = check_array(init_centers, dtype=float)
            if centers.shape != (k, d):
                raise ValueError(f"init_centers must have shape {(k, d)}")
            labels = np.argmin(
                np.sum((data[:, None, :] - centers[None, :, :]) ** 2, axis=2), axis=1)

        weights, means, covs = self._init_from_clusters(data, centers, labels)
        history = []
        prev_ll = -np.inf
        converged = False
        for _ in range(int(self.max_iter)):
            log_resp, ll = self._e_step(data, weights, means, covs)
            if history and ll < history[-1] - 1e-9 * max(1.0, abs(history[-1])):
                # Covariance regularization can nudge the likelihood down by
                # a hair near convergence; keep the best parameters and stop.
                weights, means, covs = prev_params
                converged = True
                break
            history.append(ll)
            if np.isfinite(prev_ll) and abs(ll - prev_ll) <= self.tol * abs(prev_ll):
                converged = True
                break
            prev_ll = ll
            prev_params = (weights, means, covs)
            weights, means, covs = self._m_step(data, log_resp)

        self.weights_ = weights
        self.means_ = means
        self.covariances_ = covs
        self.log_likelihood_history_ = np.array(history)
        self.n_iter_ = len(history)
        self.converged_ = converged
        self.n_features_in_ = X.shape[1]
        self.n_targets_ = y.shape[1]
        self._precompute()
        return self

    def _init_from_clusters(self, data, centers, labels):
        n, d = data.shape
        k = centers.shape[0]
        global_cov = np.cov(data.T, ddof=0).reshape(d, d) + self.reg_covar * np.eye(d)
        weights = np.empty(k)
        covs = np.empty((k, d, d))
        means = centers.copy()
        for j in range(k):
            members = data[labels == j]
            weights[j] = max(len(members), 1) / n
            if len(members) >= 2:
                covs[j] = np.cov(members.T, ddof=0).reshape(d, d) + self.reg_covar * np.eye(d)
            else:
                covs[j] = global_cov
        return weights / weights.sum(), means, covs

    def _e_step(self, data, weights, means, covs):
        n = data.shape[0]
        k = len(weights)
        log_prob = np.empty((n, k))
        for j in range(k):
            chol, log_det = self._chol(covs[j])
            log_prob[:, j] = np.log(weights[j]) + _log_gaussians(data, means[j], chol, log_det)
        norm = logsumexp(log_prob, axis=1)
        return log_prob - norm[:, None], float(norm.sum())

    def _m_step(self, data, log_resp):
        n, d = data.shape
        resp = np.exp(log_resp)
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 10.0 * np.finfo(float).tiny)
        weights = nk / n
        means = (resp.T @ data) / nk[:, None]
        covs = np.empty((len(nk), d, d))
        for j in range(len(nk)):
            diff = data - means[j]
            covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j]
            covs[j] += self.reg_covar * np.eye(d)
        return weights, means, covs

    @staticmethod
    def _chol(cov):
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise SingularFitError(f"covariance is not positive definite: {exc}") from exc
        return chol, float(np.sum(np.log(np.diag(chol))))

    def _precompute(self):
        """Cache the per-component conditional-regression quantities."""
        p = self.n_features_in_
        k = len(self.weights_)
        self._log_weights = np.log(self.weights_)
        self._in_chol = np.empty((k, p, p))
        self._in_logdet = np.empty(k)
        self._cond_gain = np.empty((k, self.n_targets_, p))
        self._cond_bias = np.empty((k, self.n_targets_))
        for j in range(k):
            cov_in = self.covariances_[j][:p, :p]
            cov_cross = self.covariances_[j][p:, :p]
            chol, log_det = self._chol(cov_in)
            self._in_chol[j] = chol
            self._in_logdet[j] = log_det
            # gain = Sigma_yx @ inv(Sigma_xx), solved through the factor
            half = linalg.solve_triangular(chol, cov_cross.T, lower=True)
            self._cond_gain[j] = linalg.solve_triangular(chol.T, half, lower=False).T
            self._cond_bias[j] = self.means_[j][p:] - self._cond_gain[j] @ self.means_[j][:p]

    # -- inference -------------------------------------------------------

    def _log_input_prob(self, X):
        k = len(self.weights_)
        log_prob = np.empty((X.shape[0], k))
        for j in range(k):
            log_prob[:, j] = self._log_weights[j] + _log_gaussians(
                X, self.means_[j][: self.n_features_in_], self._in_chol[j], self._in_logdet[j])
        return log_prob

    def responsibilities(self, X):
        """Per-component posterior weights h_j(x); rows sum to one."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=float)
        log_prob = self._log_input_prob(X)
        return np.exp(log_prob - logsumexp(log_prob, axis=1)[:, None])

    def _conditional_mean(self, X):
        log_prob = self._log_input_prob(X)
        resp = np.exp(log_prob - logsumexp(log_prob, axis=1)[:, None])
        # (n, k, q): per-component conditional means
        cond = np.einsum("kqp,np->nkq", self._cond_gain, X) + self._cond_bias[None, :, :]
        return np.einsum("nk,nkq->nq", resp, cond)

    def predict(self, X):
        """Conditional mean of the targets given ``X`` (n, n_targets)."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} input features, got {X.shape[1]}")
        return self._conditional_mean(X)

    def score_samples(self, X, y):
        """Per-sample log density of the joint (input, target) vectors."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=float)
        y = check_array(y, dtype=float)
        data = np.hstack([X, y])
        k = len(self.weights_)
        log_prob = np.empty((data.shape[0], k))
        for j in range(k):
            chol, log_det = self._chol(self.covariances_[j])
            log_prob[:, j] = self._log_weights[j] + _log_gaussians(
                data, self.means_[j], chol, log_det)
        return logsumexp(log_prob, axis=1)

    def log_likelihood(self, X, y) -> float:
        """Total joint log-likelihood of a dataset under the fitted mixture."""
        return float(self.score_samples(X, y).sum())


def select_n_components(X, y, k_range, n_folds: int = 5, random_state=None,
                        **fit_params) -> int:
    """Pick the component count maximizing held-out log-likelihood.

    The data is split into ``n_folds`` shuffled folds; each candidate K is
    scored by the mean per-sample held-out joint log-likelihood.  Ties break
    toward the smaller K.  With ``n_folds < 2`` the score falls back to the
    training-set log-likelihood (no held-out data).
    """
    X = check_array(X, dtype=float)
    y = check_array(y, dtype=float)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range must be non-empty")
    n = X.shape[0]
    ss = np.random.SeedSequence(random_state)
    fold_seed, *fit_seeds = ss.spawn(1 + len(ks) * max(1, n_folds))
    scores = np.full(len(ks), -np.inf)
    if n_folds < 2:
        for i, k in enumerate(ks):
            est = GaussianMixtureRegression(
                n_components=k, random_state=fit_seeds[i], **fit_params)
            try:
                est.fit(X, y)
            except (ValueError, SingularFitError):
                continue
            scores[i] = est.log_likelihood(X, y) / n
    else:
        perm = np.random.default_rng(fold_seed).permutation(n)
        folds = np.array_split(perm, n_folds)
        for i, k in enumerate(ks):
            total = 0.0
            count = 0
            ok = True
            for f, held in enumerate(folds):
                train = np.setdiff1d(perm, held, assume_unique=True)
                est = GaussianMixtureRegression(
                    n_components=k, random_state=fit_seeds[i * n_folds + f], **fit_params)
                try:
                    est.fit(X[train], y[train])
                except (ValueError, SingularFitError):
                    ok = False
                    break
                total += est.log_likelihood(X[held], y[held])
                count += len(held)
            if ok:
                scores[i] = total / count
    if not np.any(np.isfinite(scores)):
        raise ValueError("no candidate component count could be fitted")
    return ks[int(np.argmax(scores))]


@dataclass
class CompensationModel:
    """A fitted mixture plus the control context it was trained under.

    The stored gain and 6x8 error map fingerprint the training conditions;
    controllers warn when run with different values.
    """

    regressor: GaussianMixtureRegression
    control_gain: float
    error_map: np.ndarray
    seed: int

    def predict_compensation(self, eps) -> np.ndarray:
        """Compensating twist (6,) for one mapped error vector (6,)."""
        eps = np.asarray(eps, dtype=float)
        return self.regressor._conditional_mean(eps[None, :])[0]

    def mismatches(self, control_gain: float, error_map) -> list[str]:
        """Human-readable differences between run and training conditions."""
        notes = []
        if abs(control_gain - self.control_gain) > 1e-12:
            notes.append(
                f"gain {control_gain} differs from training gain {self.control_gain}")
        if np.max(np.abs(np.asarray(error_map, dtype=float) - self.error_map)) > 1e-9:
            notes.append("interaction-matrix pseudoinverse differs from training value")
        return notes


def train_compensation_model(ts: TrainingSet, n_components: int = 11,
                             random_state=0, k_grid=None, n_folds: int = 5,
                             **fit_params) -> CompensationModel:
    """Fit the compensation regressor on a training set.

    When ``k_grid`` is given, the component count is first chosen by
    cross-validated grid search and ``n_components`` is ignored.
    """
    if k_grid is not None:
        n_components = select_n_components(
            ts.inputs, ts.targets, k_grid, n_folds=n_folds,
            random_state=random_state, **fit_params)
    reg = GaussianMixtureRegression(
        n_components=n_components, random_state=random_state, **fit_params)
    reg.fit(ts.inputs, ts.targets)
    seed = random_state if isinstance(random_state, (int, np.integer)) else 0
    return CompensationModel(
        regressor=reg, control_gain=ts.control_gain,
        error_map=ts.error_map, seed=int(seed))


# -- model file I/O ------------------------------------------------------

_MODEL_KEYS = {"k", "dim_in", "dim_out", "weights", "means", "covariances",
               "lambda", "lhat_pinv", "seed"}


def save_model(model: CompensationModel, path) -> None:
    """Write a model file (JSON; floats keep full round-trip precision)."""
    reg = model.regressor
    check_is_fitted(reg, "weights_")
    doc = {
        "k": int(reg.n_components),
        "dim_in": int(reg.n_features_in_),
        "dim_out": int(reg.n_targets_),
        "weights": reg.weights_.tolist(),
        "means": reg.means_.tolist(),
        "covariances": reg.covariances_.tolist(),
        "lambda": float(model.control_gain),
        "lhat_pinv": model.error_map.tolist(),
        "seed": int(model.seed),
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_model(path) -> CompensationModel:
    """Read and validate a model file; raises ModelFormatError on problems."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != _MODEL_KEYS:
        raise ModelFormatError(f"model file must contain exactly keys {sorted(_MODEL_KEYS)}")
    try:
        k = int(doc["k"])
        dim_in = int(doc["dim_in"])
        dim_out = int(doc["dim_out"])
        weights = np.asarray(doc["weights"], dtype=float)
        means = np.asarray(doc["means"], dtype=float)
        covs = np.asarray(doc["covariances"], dtype=float)
        gain = float(doc["lambda"])
        error_map = np.asarray(doc["lhat_pinv"], dtype=float)
        seed = int(doc["seed"])
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model fields: {exc}") from exc

    d = dim_in + dim_out
    if (dim_in, dim_out) != (6, 6):
        raise ModelFormatError("model must map 6 inputs to 6 outputs")
    if weights.shape != (k,) or means.shape != (k, d) or covs.shape != (k, d, d):
        raise ModelFormatError("weights/means/covariances shapes are inconsistent")
    if error_map.shape != (6, 8):
        raise ModelFormatError("lhat_pinv must be 6x8")
    if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(means))
            and np.all(np.isfinite(covs)) and np.all(np.isfinite(error_map))):
        raise ModelFormatError("model contains non-finite values")
    if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ModelFormatError("component weights must be non-negative and sum to 1")
    for j in range(k):
        if np.max(np.abs(covs[j] - covs[j].T)) > 1e-9:
            raise ModelFormatError(f"covariance {j} is not symmetric")
        if np.min(np.linalg.eigvalsh(covs[j])) < 1e-12:
            raise ModelFormatError(f"covariance {j} is not positive definite")
    if gain <= 0.0:
        raise ModelFormatError("lambda must be positive")

    reg = GaussianMixtureRegression(n_components=k)
    reg.weights_ = weights
    reg.means_ = means
    reg.covariances_ = covs
    reg.n_features_in_ = dim_in
    reg.n_targets_ = dim_out
    reg.converged_ = True
    reg.n_iter_ = 0
    reg.log_likelihood_history_ = np.empty(0)
    reg._precompute()
    return CompensationModel(regressor=reg, control_gain=gain,
                             error_map=error_map, seed=seed)
