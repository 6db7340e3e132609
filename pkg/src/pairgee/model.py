"""Model definitions for pairwise-attribute regression.

A model couples a mean function (link applied to a linear predictor of a
between-subject covariate) with a working variance for the pairwise
response.  This module holds the pure, per-pair pieces: subject records,
covariate constructions for a pair, link evaluation with analytic
gradients, and the dedicated mean maps of the two-dimensional models
(rater-agreement and mean/variance-of-distance).

Everything here is value-semantics and side-effect free; instances can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .links import LINK_KINDS, link_mean_deriv

PAIR_TRANSFORMS = ("difference", "sum", "concatenate", "onehot")
VARIANCE_KINDS = ("constant", "poisson", "propmean", "nb", "bernoulli", "userfixed")


# --------------------------------------------------------------------------- #
# Subject-level data
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class SubjectRecord:
    """One subject's raw data: outcome vector ``y`` and covariate vector ``x``.

    ``y`` has length m >= 1 (a scalar outcome is a length-1 vector); ``x``
    has length p >= 0.  All entries must be finite.
    """

    id: object
    y: np.ndarray
    x: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=float)))
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float))
                           if np.size(self.x) else np.empty(0))
        if self.y.ndim != 1 or self.y.size < 1:
            raise InputError(f"subject {self.id!r}: y must be a nonempty vector")
        if not np.all(np.isfinite(self.y)):
            raise InputError(f"subject {self.id!r}: non-finite outcome entry")
        if self.x.size and not np.all(np.isfinite(self.x)):
            raise InputError(f"subject {self.id!r}: non-finite covariate entry")


def stack_subjects(records: Sequence[SubjectRecord]) -> tuple[list, np.ndarray, np.ndarray]:
    """Validate a homogeneous dataset and stack it into (ids, Y, X) arrays.

    Every record must share the same outcome length m and covariate length p,
    and ids must be unique.
    """
    if len(records) < 1:
        raise InputError("empty subject dataset")
    m = records[0].y.size
    p = records[0].x.size
    ids = []
    for rec in records:
        if rec.y.size != m or rec.x.size != p:
            raise InputError(
                f"subject {rec.id!r}: inconsistent dimensions "
                f"(expected m={m}, p={p}; got m={rec.y.size}, p={rec.x.size})")
        ids.append(rec.id)
    if len(set(ids)) != len(ids):
        raise InputError("duplicate subject ids in dataset")
    Y = np.vstack([rec.y for rec in records])
    X = (np.vstack([rec.x for rec in records]) if p else
         np.empty((len(records), 0)))
    return ids, Y, X


# --------------------------------------------------------------------------- #
# Pairwise covariate constructions
# --------------------------------------------------------------------------- #

def onehot_pair_labels(levels: int) -> list[tuple[int, int]]:
    """Unordered level pairs (k1, k2), k1 <= k2, in the fixed slot order."""
    return [(k1, k2) for k1 in range(1, levels + 1) for k2 in range(k1, levels + 1)]


def _onehot_slot(k1: int, k2: int, levels: int) -> int:
    # row-major over k1 <= k2: slot = offset of row k1 + (k2 - k1)
    lo, hi = (k1, k2) if k1 <= k2 else (k2, k1)
    start = (lo - 1) * levels - (lo - 1) * (lo - 2) // 2
    return start + (hi - lo)


def encode_pair_onehot(x1: int, x2: int, levels: int) -> np.ndarray:
    """Indicator vector for the unordered level pair {x1, x2}.

    With K = ``levels`` categories the output has length K + K(K-1)/2, one
    slot per unordered pair, ordered (1,1), (1,2), ..., (1,K), (2,2), ...,
    (K,K).  Exactly one entry is 1.  The encoding is symmetric in its two
    arguments, so concordant and discordant pairs get distinct slots but
    the subject order within a pair is irrelevant.
    """
    if levels < 1:
        raise InputError("onehot encoding needs at least one level")
    k1, k2 = int(x1), int(x2)
    if k1 != x1 or k2 != x2:
        raise InputError(f"categorical levels must be integers, got ({x1!r}, {x2!r})")
    if not (1 <= k1 <= levels and 1 <= k2 <= levels):
        raise InputError(f"level pair ({k1}, {k2}) outside 1..{levels}")
    out = np.zeros(levels + levels * (levels - 1) // 2)
    out[_onehot_slot(k1, k2, levels)] = 1.0
    return out


@dataclass(frozen=True)
class PairCovariate:
    """Recipe turning two subjects' covariate vectors into one pair covariate.

    transform:
      ``difference``   x1 - x2 (antisymmetric), requires equal dims
      ``sum``          x1 + x2 (symmetric), requires equal dims
      ``concatenate``  (x1', x2')'
      ``onehot``       unordered-pair indicators of a single categorical
                       covariate with ``levels`` categories
    """

    transform: str
    levels: int = 0  # only for onehot

    def __post_init__(self):
        if self.transform not in PAIR_TRANSFORMS:
            raise InputError(f"unknown pair transform {self.transform!r}")
        if self.transform == "onehot" and self.levels < 1:
            raise InputError("onehot transform requires levels >= 1")

    def output_dim(self, p: int) -> int:
        if self.transform in ("difference", "sum"):
            return p
        if self.transform == "concatenate":
            return 2 * p
        return self.levels + self.levels * (self.levels - 1) // 2


def pair_covariate_eval(spec: PairCovariate, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Apply a pair-covariate recipe to one pair of subject covariate vectors."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape:
        raise InputError(f"covariate dims differ: {x1.shape} vs {x2.shape}")
    if spec.transform == "difference":
        return x1 - x2
    if spec.transform == "sum":
        return x1 + x2
    if spec.transform == "concatenate":
        return np.concatenate([x1, x2])
    if x1.size != 1:
        raise InputError("onehot transform needs a single categorical covariate")
    return encode_pair_onehot(float(x1[0]), float(x2[0]), spec.levels)


def pair_covariate_matrix(spec: PairCovariate, X: np.ndarray,
                          i1: np.ndarray, i2: np.ndarray) -> np.ndarray:
    """Vectorised ``pair_covariate_eval`` over an index array of pairs."""
    X = np.asarray(X, dtype=float)
    if spec.transform == "difference":
        return X[i1] - X[i2]
    if spec.transform == "sum":
        return X[i1] + X[i2]
    if spec.transform == "concatenate":
        return np.hstack([X[i1], X[i2]])
    if X.shape[1] != 1:
        raise InputError("onehot transform needs a single categorical covariate")
    levels = spec.levels
    ints = X[:, 0].astype(np.int64)
    if np.any(ints != X[:, 0]):
        raise InputError("categorical covariate has non-integer levels")
    if ints.min(initial=levels) < 1 or ints.max(initial=1) > levels:
        raise InputError(f"categorical level outside 1..{levels}")
    lo = np.minimum(ints[i1], ints[i2])
    hi = np.maximum(ints[i1], ints[i2])
    slots = (lo - 1) * levels - (lo - 1) * (lo - 2) // 2 + (hi - lo)
    out = np.zeros((len(i1), spec.output_dim(1)))
    out[np.arange(len(i1)), slots] = 1.0
    return out


# --------------------------------------------------------------------------- #
# Working variances
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class WorkingVariance:
    """Assumed form of Var(f | X) used to weight the estimating equations.

    kind:
      ``constant``   V = c                       (value = c)
      ``poisson``    V = h
      ``propmean``   V = tau2 * h                (value = tau2)
      ``nb``         V = h * (1 + h / tau)       (value = tau; inf => Poisson)
      ``bernoulli``  V = h * (1 - h), needs h in (0, 1)
      ``userfixed``  per-pair values supplied by the caller

    For kinds with a nuisance parameter, ``value=None`` means "not yet
    estimated"; the adaptive fitting loop fills it in.
    """

    kind: str
    value: float | None = None
    per_pair: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in VARIANCE_KINDS:
            raise InputError(f"unknown working-variance kind {self.kind!r}")
        if self.kind == "userfixed":
            if self.per_pair is None:
                raise InputError("userfixed working variance needs per-pair values")
            vals = np.asarray(self.per_pair, dtype=float)
            if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
                raise InputError("userfixed variances must be finite and positive")
            object.__setattr__(self, "per_pair", vals)
        if self.value is not None and self.kind in ("constant", "propmean") \
                and self.value <= 0:
            raise InputError(f"{self.kind} variance parameter must be positive")
        if self.value is not None and self.kind == "nb" and self.value <= 0:
            raise InputError("nb dispersion must be positive")

    @property
    def has_nuisance(self) -> bool:
        return self.kind in ("constant", "propmean", "nb")


def variance_eval(wv: WorkingVariance, h: np.ndarray,
                  rows: slice | None = None) -> np.ndarray:
    """Evaluate the working variance at mean values ``h``.

    ``rows`` selects the matching slice of per-pair values for the
    ``userfixed`` kind.  Caller is responsible for checking positivity of
    the result (the fitting code raises with the offending pair).
    """
    h = np.asarray(h, dtype=float)
    if wv.kind == "constant":
        c = 1.0 if wv.value is None else wv.value
        return np.full_like(h, c)
    if wv.kind == "poisson":
        return h.copy()
    if wv.kind == "propmean":
        tau2 = 1.0 if wv.value is None else wv.value
        return tau2 * h
    if wv.kind == "nb":
        tau = np.inf if wv.value is None else wv.value
        return h * (1.0 + h / tau)
    if wv.kind == "bernoulli":
        return h * (1.0 - h)
    vals = wv.per_pair
    return vals[rows] if rows is not None else vals.copy()


# --------------------------------------------------------------------------- #
# Scalar functional-response model
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class FrmModel:
    """Scalar model: E(f | pair covariate x) = link(beta' x [+ intercept]).

    ``pair_covariate`` is optional; it is used when building pair data from
    subject records and may be omitted when the pair covariates are already
    materialised.
    """

    link: str
    working_variance: WorkingVariance
    intercept: bool = True
    pair_covariate: PairCovariate | None = None
    response_dim: int = 1

    def __post_init__(self):
        if self.link not in LINK_KINDS:
            raise InputError(f"unknown link kind {self.link!r}")
        if self.response_dim != 1:
            raise InputError("FrmModel is scalar; use IccModel / MeanVarianceModel")

    def beta_dim(self, p: int) -> int:
        base = self.pair_covariate.output_dim(p) if self.pair_covariate else p
        return base + (1 if self.intercept else 0)


def augment(x: np.ndarray, intercept: bool) -> np.ndarray:
    """Prepend an all-ones column when the model has an intercept."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not intercept:
        return x
    return np.hstack([np.ones((x.shape[0], 1)), x])


def mean_and_gradient(model: FrmModel, pair_x: np.ndarray,
                      beta: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean h and analytic beta-gradient D for one pair covariate vector.

    h = link(eta), eta = beta' x_aug where x_aug is ``pair_x`` with a
    leading 1 when the model has an intercept; D = link'(eta) * x_aug.
    """
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise InputError("beta must be finite")
    xa = augment(np.atleast_1d(pair_x), model.intercept)
    if xa.shape[1] != beta.size:
        raise InputError(f"beta length {beta.size} does not match covariate "
                         f"dimension {xa.shape[1]}")
    eta = xa @ beta
    h, dh = link_mean_deriv(model.link, eta)
    return float(h[0]), dh[0] * xa[0]


# --------------------------------------------------------------------------- #
# Two-dimensional mean maps
# --------------------------------------------------------------------------- #

def icc_mean_map(theta: Sequence[float], raters: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean map of the rater-agreement model and its analytic Jacobian.

    theta = (tau2, rho) with tau2 > 0.  With K = ``raters``:

        h1 = [1 + (K - 1) rho] tau2 / K      (expected squared mean gap / 2)
        h2 = tau2                            (expected per-rater squared gap / 2)

    Returns (h, J) with h = (h1, h2) and J[a, b] = dh_a / dtheta_b.
    """
    tau2, rho = float(theta[0]), float(theta[1])
    if tau2 <= 0:
        raise InputError(f"tau2 must be positive, got {tau2}")
    K = int(raters)
    if K < 2:
        raise InputError("rater-agreement model needs at least 2 raters")
    c = (1.0 + (K - 1) * rho) / K
    h = np.array([c * tau2, tau2])
    jac = np.array([[c, (K - 1) * tau2 / K],
                    [1.0, 0.0]])
    return h, jac


def meanvar_mean_map(theta: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Mean map of the two-parameter (mu, sigma2) model on (f, f^2).

    E f = mu and E f^2 = sigma2 + mu^2, so the moment equations recover the
    pairwise mean and the centered pairwise second moment in closed form.
    """
    mu, sigma2 = float(theta[0]), float(theta[1])
    h = np.array([mu, sigma2 + mu * mu])
    jac = np.array([[1.0, 0.0],
                    [2.0 * mu, 1.0]])
    return h, jac


@dataclass(frozen=True)
class IccModel:
    """Two-dimensional model for rater agreement; parameters (tau2, rho)."""

    raters: int
    response_dim: int = 2
    param_names: tuple[str, str] = ("tau2", "rho")

    def mean_map(self, theta):
        return icc_mean_map(theta, self.raters)

    def init_theta(self, R: np.ndarray) -> np.ndarray:
        tau2 = float(max(np.mean(R[:, 1]), 1e-12))
        return np.array([tau2, 0.0])


@dataclass(frozen=True)
class MeanVarianceModel:
    """Two-dimensional model for the mean and variance of a pairwise response."""

    response_dim: int = 2
    param_names: tuple[str, str] = ("mu", "sigma2")

    def mean_map(self, theta):
        return meanvar_mean_map(theta)

    def init_theta(self, R: np.ndarray) -> np.ndarray:
        mu = float(np.mean(R[:, 0]))
        sigma2 = float(max(np.mean(R[:, 1]) - mu * mu, 1e-12))
        return np.array([mu, sigma2])
