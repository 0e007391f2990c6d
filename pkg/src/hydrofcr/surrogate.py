"""Efficiency meta-model: multivariate adaptive regression splines.

:class:`MARSRegressor` is a scikit-learn compatible estimator (``fit``,
``predict``, ``get_params``) built from products of hinge functions.  The
forward pass adds mirrored hinge pairs greedily, the backward pass prunes
terms by generalized cross-validation.  A cubic-smoothed variant of the
fitted basis gives a model with a continuous first derivative.

:class:`EfficiencySurrogate` wraps a fitted regressor with the input ranges,
the held-out fit statistics and JSON (de)serialization.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .hillchart import TrainingSet

SCHEMA_VERSION = 1
FEATURES = ("alpha_deg", "beta_deg", "n_ed")


# relative residual norm below which a candidate column counts as dependent
_INDEP_TOL = 1e-6


class FitError(RuntimeError):
    pass


def _hinge(x, knot, sign):
    return np.maximum(0.0, sign * (x - knot))


def _hinge_deriv(x, knot, sign):
    # right-sided derivative at the knot
    if sign > 0:
        return (x >= knot).astype(float)
    return -(x < knot).astype(float)


def _cubic_hinge(x, knot, sign, lo, hi):
    """C1 truncated cubic replacing a hinge between side knots ``lo < knot < hi``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    w = hi - lo
    if sign > 0:
        p = (2.0 * hi + lo - 3.0 * knot) / w**2
        r = (2.0 * knot - hi - lo) / w**3
        mid = (x > lo) & (x < hi)
        d = x[mid] - lo
        out[mid] = p * d * d + r * d**3
        right = x >= hi
        out[right] = x[right] - knot
    else:
        p = (3.0 * knot - 2.0 * lo - hi) / w**2
        r = (lo + hi - 2.0 * knot) / w**3
        mid = (x > lo) & (x < hi)
        d = x[mid] - hi
        out[mid] = p * d * d - r * d**3
        left = x <= lo
        out[left] = knot - x[left]
    return out


def _cubic_hinge_deriv(x, knot, sign, lo, hi):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    w = hi - lo
    if sign > 0:
        p = (2.0 * hi + lo - 3.0 * knot) / w**2
        r = (2.0 * knot - hi - lo) / w**3
        mid = (x > lo) & (x < hi)
        d = x[mid] - lo
        out[mid] = 2.0 * p * d + 3.0 * r * d * d
        out[x >= hi] = 1.0
    else:
        p = (3.0 * knot - 2.0 * lo - hi) / w**2
        r = (lo + hi - 2.0 * knot) / w**3
        mid = (x > lo) & (x < hi)
        d = x[mid] - hi
        out[mid] = 2.0 * p * d - 3.0 * r * d * d
        out[x <= lo] = -1.0
    return out


class MARSRegressor(RegressorMixin, BaseEstimator):
    """Multivariate adaptive regression splines.

    Parameters
    ----------
    max_terms : int
        Upper bound on basis functions, intercept included, after the forward pass.
    max_degree : int
        Maximum number of hinge factors in one term.
    penalty : float
        GCV cost per knot.
    smooth : bool
        Predict with the cubic-smoothed basis (continuous first derivative)
        instead of the piecewise-linear one.
    min_improvement : float
        Forward pass stops once the relative RSS reduction of the best
        candidate falls below this value.
    """

    def __init__(self, max_terms=40, max_degree=2, penalty=3.0, smooth=False, min_improvement=1e-7):
        self.max_terms = max_terms
        self.max_degree = max_degree
        self.penalty = penalty
        self.smooth = smooth
        self.min_improvement = min_improvement

    # -- fitting -------------------------------------------------------------

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        n, p = X.shape
        if np.ptp(y) == 0.0:
            raise FitError("target is constant; nothing to fit")
        if np.any(np.ptp(X, axis=0) == 0.0):
            raise FitError("an input dimension is constant")
        if self.max_terms < 1 or self.max_degree < 1:
            raise ValueError("max_terms and max_degree must be positive")

        self.n_features_in_ = p
        self.input_min_ = X.min(axis=0)
        self.input_max_ = X.max(axis=0)

        terms, rss_forward = self._forward(X, y)
        self.forward_terms_ = [tuple(t) for t in terms]
        self.terms_, self.gcv_path_ = self._backward(X, y, terms)
        B = self._basis(X, self.terms_, smooth=False)
        self.coef_ = np.linalg.lstsq(B, y, rcond=None)[0]
        self.gcv_forward_ = self._gcv(rss_forward, n, len(terms))
        self.gcv_ = self._gcv(float(np.sum((y - B @ self.coef_) ** 2)), n, len(self.terms_))

        self.side_knots_ = self._side_knots(self.terms_)
        Bs = self._basis(X, self.terms_, smooth=True)
        self.coef_smooth_ = np.linalg.lstsq(Bs, y, rcond=None)[0]
        return self

    def _gcv(self, rss, n, m):
        c = m + self.penalty * (m - 1) / 2.0
        if c >= n:
            return np.inf
        return rss / n / (1.0 - c / n) ** 2

    def _forward(self, X, y):
        n, p = X.shape
        knots = [np.unique(X[:, j])[:-1] for j in range(p)]
        terms = [()]
        cols = [np.ones(n)]
        Q = np.ones((n, 1)) / np.sqrt(n)
        r = y - Q @ (Q.T @ y)
        rss = float(r @ r)
        tss = rss

        while len(terms) < self.max_terms:
            best = None
            for pi, parent in enumerate(terms):
                if len(parent) >= self.max_degree:
                    continue
                used = {f[0] for f in parent}
                bp = cols[pi]
                if not np.any(bp):
                    continue
                for j in range(p):
                    if j in used or knots[j].size == 0:
                        continue
                    diff = X[:, j][:, None] - knots[j][None, :]
                    red, pair = self._score_pair(bp[:, None] * np.maximum(diff, 0.0),
                                                 bp[:, None] * np.maximum(-diff, 0.0), Q, r)
                    k = int(np.argmax(red))
                    if best is None or red[k] > best[0] * (1.0 + 1e-12):
                        best = (red[k], pi, j, knots[j][k], pair[k])
            if best is None or best[0] <= self.min_improvement * tss:
                break
            _, pi, j, t, pair = best
            added = 0
            for sign, keep in zip((1.0, -1.0), pair):
                if not keep or len(terms) >= self.max_terms:
                    continue
                col = cols[pi] * _hinge(X[:, j], t, sign)
                q = col - Q @ (Q.T @ col)
                nq = np.linalg.norm(q)
                if nq <= _INDEP_TOL * np.linalg.norm(col):
                    continue
                q /= nq
                Q = np.column_stack([Q, q])
                r = r - q * (q @ r)
                terms.append(terms[pi] + ((j, float(t), sign),))
                cols.append(col)
                added += 1
            if added == 0:
                break
            rss = float(r @ r)
        return terms, rss

    @staticmethod
    def _score_pair(Cp, Cm, Q, r, tol=_INDEP_TOL):
        """RSS reduction from adding each mirrored hinge pair (columns of Cp, Cm)."""
        # r is already orthogonal to span(Q): only the projections are needed
        Pp = Q.T @ Cp
        Pm = Q.T @ Cm
        cp = np.einsum("ij,ij->j", Cp, Cp)
        cm = np.einsum("ij,ij->j", Cm, Cm)
        a = cp - np.einsum("ij,ij->j", Pp, Pp)
        d = cm - np.einsum("ij,ij->j", Pm, Pm)
        b = np.einsum("ij,ij->j", Cp, Cm) - np.einsum("ij,ij->j", Pp, Pm)
        v0 = r @ Cp
        v1 = r @ Cm
        # same independence test as the Gram-Schmidt step that inserts the column
        okp = (cp > 0) & (a > tol * tol * cp)
        okm = (cm > 0) & (d > tol * tol * cm)
        det = a * d - b * b
        both = okp & okm & (det > 1e-9 * a * d)
        with np.errstate(divide="ignore", invalid="ignore"):
            red_both = np.where(both, (d * v0**2 - 2 * b * v0 * v1 + a * v1**2) / np.where(both, det, 1.0), 0.0)
            red_p = np.where(okp, v0**2 / np.where(okp, a, 1.0), 0.0)
            red_m = np.where(okm, v1**2 / np.where(okm, d, 1.0), 0.0)
        single_p = red_p >= red_m
        red = np.where(both, red_both, np.maximum(red_p, red_m))
        keep = np.stack([both | (~both & single_p & okp), both | (~both & ~single_p & okm)], axis=1)
        return red, keep

    def _backward(self, X, y, terms):
        n = X.shape[0]
        B = self._basis(X, terms, smooth=False)
        G = B.T @ B
        by = B.T @ y
        yy = float(y @ y)

        def rss_of(idx):
            idx = list(idx)
            sol = np.linalg.lstsq(G[np.ix_(idx, idx)], by[idx], rcond=None)[0]
            return max(yy - float(by[idx] @ sol), 0.0)

        active = list(range(len(terms)))
        best_set = list(active)
        best_gcv = self._gcv(rss_of(active), n, len(active))
        path = [(len(active), best_gcv)]
        while len(active) > 1:
            candidates = []
            for k in active[1:]:
                trial = [i for i in active if i != k]
                candidates.append((rss_of(trial), k))
            rss, drop = min(candidates)
            active = [i for i in active if i != drop]
            g = self._gcv(rss, n, len(active))
            path.append((len(active), g))
            if g < best_gcv:
                best_gcv, best_set = g, list(active)
        return [terms[i] for i in best_set], path

    def _side_knots(self, terms):
        per_var = {}
        for term in terms:
            for j, t, _ in term:
                per_var.setdefault(j, set()).add(t)
        out = {}
        for j, ks in per_var.items():
            ks = np.array(sorted(ks))
            edges = np.concatenate([[self.input_min_[j]], ks, [self.input_max_[j]]])
            for i, t in enumerate(ks):
                lo = 0.5 * (edges[i] + t)
                hi = 0.5 * (t + edges[i + 2])
                if lo >= t:
                    lo = t - 1e-6 * max(1.0, abs(t))
                out[(j, t)] = (lo, hi)
        return out

    # -- evaluation ----------------------------------------------------------

    def _factor(self, x, j, t, sign, smooth):
        if smooth:
            lo, hi = self.side_knots_[(j, t)]
            return _cubic_hinge(x, t, sign, lo, hi)
        return _hinge(x, t, sign)

    def _factor_deriv(self, x, j, t, sign, smooth):
        if smooth:
            lo, hi = self.side_knots_[(j, t)]
            return _cubic_hinge_deriv(x, t, sign, lo, hi)
        return _hinge_deriv(x, t, sign)

    def _basis(self, X, terms, smooth):
        B = np.ones((X.shape[0], len(terms)))
        for m, term in enumerate(terms):
            for j, t, sign in term:
                B[:, m] *= self._factor(X[:, j], j, t, sign, smooth)
        return B

    def basis_matrix(self, X, smooth=None):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return self._basis(X, self.terms_, self.smooth if smooth is None else smooth)

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if self.smooth:
            return self._basis(X, self.terms_, True) @ self.coef_smooth_
        return self._basis(X, self.terms_, False) @ self.coef_

    def gradient(self, X):
        """Analytic gradient of :meth:`predict`, shape ``(n_samples, n_features)``."""
        check_is_fitted(self, "coef_")
        X = check_array(X)
        smooth = self.smooth
        coef = self.coef_smooth_ if smooth else self.coef_
        grad = np.zeros_like(X, dtype=float)
        for c, term in zip(coef, self.terms_):
            if not term:
                continue
            vals = [self._factor(X[:, j], j, t, s, smooth) for j, t, s in term]
            for i, (j, t, s) in enumerate(term):
                d = self._factor_deriv(X[:, j], j, t, s, smooth)
                for k, v in enumerate(vals):
                    if k != i:
                        d = d * v
                grad[:, j] += c * d
        return grad

    def knots(self):
        """Sorted knot locations per input dimension."""
        check_is_fitted(self, "coef_")
        out = [set() for _ in range(self.n_features_in_)]
        for term in self.terms_:
            for j, t, _ in term:
                out[j].add(t)
        return [np.array(sorted(s)) for s in out]

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        check_is_fitted(self, "coef_")
        return {
            "params": self.get_params(),
            "n_features": int(self.n_features_in_),
            "input_min": self.input_min_.tolist(),
            "input_max": self.input_max_.tolist(),
            "terms": [[{"var": int(j), "knot": float(t), "sign": int(s)} for j, t, s in term] for term in self.terms_],
            "coef": self.coef_.tolist(),
            "coef_smooth": self.coef_smooth_.tolist(),
            "side_knots": [[int(j), float(t), lo, hi] for (j, t), (lo, hi) in sorted(self.side_knots_.items())],
            "gcv": float(self.gcv_),
            "gcv_forward": float(self.gcv_forward_),
        }

    @classmethod
    def from_dict(cls, d):
        est = cls(**d["params"])
        est.n_features_in_ = d["n_features"]
        est.input_min_ = np.asarray(d["input_min"], dtype=float)
        est.input_max_ = np.asarray(d["input_max"], dtype=float)
        est.terms_ = [tuple((f["var"], float(f["knot"]), float(f["sign"])) for f in term) for term in d["terms"]]
        est.coef_ = np.asarray(d["coef"], dtype=float)
        est.coef_smooth_ = np.asarray(d["coef_smooth"], dtype=float)
        est.side_knots_ = {(int(j), float(t)): (float(lo), float(hi)) for j, t, lo, hi in d["side_knots"]}
        est.gcv_ = d["gcv"]
        est.gcv_forward_ = d["gcv_forward"]
        return est


@dataclass(frozen=True)
class FitConfig:
    max_terms: int = 100
    max_degree: int = 2
    penalty: float = 3.0
    smooth: bool = False
    holdout_fraction: float = 0.2
    min_samples: int = 50


def holdout_mask(X, fraction=0.2):
    """Deterministic held-out selection by hashing the rounded grid coordinates."""
    buckets = 1_000_000
    cut = int(round(fraction * buckets))
    mask = np.empty(len(X), dtype=bool)
    for i, row in enumerate(np.round(np.asarray(X, dtype=float), 9)):
        key = ",".join(f"{v:.9f}" for v in row).encode()
        h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")
        mask[i] = (h % buckets) < cut
    return mask


@dataclass
class EfficiencySurrogate:
    """Fitted efficiency model eta(alpha, beta, n_ED) with clamped evaluation."""

    model: MARSRegressor
    input_ranges: np.ndarray  # (3, 2) rows of [min, max]
    fit_stats: dict = field(default_factory=dict)

    def _clamp(self, X):
        lo, hi = self.input_ranges[:, 0], self.input_ranges[:, 1]
        Xc = np.clip(X, lo, hi)
        return Xc, np.any(Xc != X, axis=1)

    def predict(self, X, return_clamped=False):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Xc, flag = self._clamp(X)
        y = self.model.predict(Xc)
        return (y, flag) if return_clamped else y

    def eval(self, alpha, beta, n_ed, return_clamped=False):
        a, b, n = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, n_ed)))
        y, flag = self.predict(np.column_stack([a.ravel(), b.ravel(), n.ravel()]), return_clamped=True)
        y = y.reshape(a.shape)[()]
        flag = flag.reshape(a.shape)[()]
        return (y, flag) if return_clamped else y

    def eval_gradient(self, alpha, beta, n_ed):
        """Gradient ``(d/dalpha, d/dbeta, d/dn_ED)``; zero along clamped dimensions."""
        a, b, n = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, n_ed)))
        X = np.column_stack([a.ravel(), b.ravel(), n.ravel()])
        Xc, _ = self._clamp(X)
        g = self.model.gradient(Xc)
        outside = (X < self.input_ranges[:, 0]) | (X > self.input_ranges[:, 1])
        g[outside] = 0.0
        return tuple(g[:, k].reshape(a.shape)[()] for k in range(3))

    def with_smoothing(self, smooth=True):
        est = MARSRegressor.from_dict(self.model.to_dict())
        est.smooth = smooth
        return EfficiencySurrogate(est, self.input_ranges.copy(), dict(self.fit_stats))

    def to_json(self, path=None):
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "mars_efficiency_surrogate",
            "features": list(FEATURES),
            "input_ranges": self.input_ranges.tolist(),
            "fit_stats": self.fit_stats,
            "model": self.model.to_dict(),
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not str(text_or_path).lstrip().startswith("{"):
            with open(text_or_path, encoding="utf-8") as fh:
                text = fh.read()
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported surrogate schema_version {doc.get('schema_version')!r}")
        return cls(MARSRegressor.from_dict(doc["model"]), np.asarray(doc["input_ranges"], dtype=float), doc["fit_stats"])


def fit_surrogate(samples, cfg: FitConfig = FitConfig()):
    """Fit the efficiency surrogate on a hashed 80/20 split and report held-out MSE and R^2."""
    ts = samples if isinstance(samples, TrainingSet) else TrainingSet.from_samples(samples)
    if len(ts) < cfg.min_samples:
        raise FitError(f"need at least {cfg.min_samples} samples, got {len(ts)}")
    X, y = ts.X, ts.y
    test = holdout_mask(X, cfg.holdout_fraction)
    if test.all() or not test.any():
        raise FitError("held-out split is degenerate")
    model = MARSRegressor(
        max_terms=cfg.max_terms, max_degree=cfg.max_degree, penalty=cfg.penalty, smooth=cfg.smooth
    ).fit(X[~test], y[~test])
    pred = model.predict(X[test])
    resid = y[test] - pred
    mse = float(np.mean(resid**2))
    r2 = float(1.0 - np.sum(resid**2) / np.sum((y[test] - y[test].mean()) ** 2))
    ranges = np.column_stack([X[~test].min(axis=0), X[~test].max(axis=0)])
    stats = {
        "mse": mse,
        "r2": r2,
        "n_train": int((~test).sum()),
        "n_test": int(test.sum()),
        "n_terms": len(model.terms_),
        "gcv": float(model.gcv_),
        "gcv_forward": float(model.gcv_forward_),
    }
    return EfficiencySurrogate(model, ranges, stats)
