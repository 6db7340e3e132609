"""Mean functions (inverse links) and their analytic derivatives.

Each link maps a linear predictor ``eta`` to the conditional mean ``h`` of a
pairwise response, together with ``dh/deta``.  All functions are pure and
vectorised over numpy arrays.

Available kinds
---------------
``identity``  h = eta
``exp``       h = exp(eta), guarded against overflow (eta > 700 raises)
``expit``     h = 1 / (1 + exp(-eta)), output in (0, 1)
``probitc``   h = Phi(-eta), the complementary standard-normal CDF; used by
              rank (Mann-Whitney-type) regressions.  Phi is evaluated with
              ``scipy.special.ndtr`` (Cephes erfc-based implementation,
              absolute error well below 1e-13).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, ndtr

from .errors import EvaluationError, InputError

LINK_KINDS = ("identity", "exp", "expit", "probitc")

# exp(710) overflows float64; fail loudly inside solvers instead of
# propagating inf through the estimating equations.
_EXP_ETA_MAX = 700.0

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def link_mean_deriv(kind: str, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate mean ``h(eta)`` and derivative ``h'(eta)`` for one link kind.

    Parameters
    ----------
    kind : one of ``LINK_KINDS``
    eta : array of linear predictors (any shape)

    Returns
    -------
    (h, dh) : arrays of the same shape as ``eta``

    Raises
    ------
    EvaluationError
        For the ``exp`` link when any ``eta`` exceeds 700 (carries the
        offending value) or is non-finite.
    """
    eta = np.asarray(eta, dtype=float)
    if kind == "identity":
        return eta.copy(), np.ones_like(eta)
    if kind == "exp":
        if not np.all(np.isfinite(eta)):
            raise EvaluationError("non-finite linear predictor under exp link",
                                  eta=float(np.max(np.abs(eta))))
        hi = float(np.max(eta, initial=-np.inf))
        if hi > _EXP_ETA_MAX:
            raise EvaluationError(
                f"exp-link overflow: eta={hi:.6g} exceeds {_EXP_ETA_MAX:g}", eta=hi)
        h = np.exp(eta)
        return h, h.copy()
    if kind == "expit":
        h = expit(eta)
        return h, h * (1.0 - h)
    if kind == "probitc":
        h = ndtr(-eta)
        dh = -_INV_SQRT_2PI * np.exp(-0.5 * eta * eta)
        return h, dh
    raise InputError(f"unknown link kind {kind!r}; expected one of {LINK_KINDS}")
