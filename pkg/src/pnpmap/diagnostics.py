"""Convergence-condition gates, Tweedie checks and MMSE-gap reporting.

The gates evaluate sufficient convergence conditions from the splitting
literature for the quadratic data term ``||A x - y||^2 / (2 alpha sigma^2)``
(regularisation weight folded into the likelihood).  They are reported, not
enforced: the schemes are routinely observed to converge with the
conditions unmet, so a gate annotates a run instead of blocking it.

Gate arithmetic is plain Python, so exact types such as
:class:`fractions.Fraction` pass through unchanged and boundary cases can
be decided exactly.

Conventions: the gates consume the Lipschitz constant of the residual
Id - D (not of D itself); each report echoes its inputs so the constant
used is visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .denoisers import Denoiser, denoiser_score
from .exceptions import ConfigurationError

SATISFIED = "satisfied"
VIOLATED = "violated"
INAPPLICABLE = "inapplicable"


@dataclass(frozen=True)
class GateReport:
    """Outcome of one convergence-condition check.

    ``margin`` is the signed distance to the decision boundary (positive
    means satisfied) in the units of the checked ratio; it is None when the
    gate does not apply.
    """

    gate: str
    inputs: dict
    verdict: str
    margin: object = None
    notes: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "gate": self.gate,
            "inputs": {k: _plain(v) for k, v in self.inputs.items()},
            "verdict": self.verdict,
            "margin": _plain(self.margin),
            "notes": list(self.notes),
        }


def _plain(v):
    if v is None:
        return None
    if isinstance(v, (bool, int, str)):
        return v
    return float(v)


def gate_fbs_ryu(alpha, epsilon, sigma, residual_l, min_singular=1.0) -> GateReport:
    """Two-sided ratio condition for forward-backward splitting.

    Checks ``L/(1+L) < epsilon/(alpha sigma^2) < (L+2)/(L+1)`` with L the
    residual Lipschitz constant.  Only applicable when the data term is
    strongly convex, i.e. the forward operator has a positive smallest
    singular value.
    """
    inputs = {"alpha": alpha, "epsilon": epsilon, "sigma": sigma,
              "residual_l": residual_l, "min_singular": min_singular}
    if min_singular <= 0:
        return GateReport("fbs-ryu", inputs, INAPPLICABLE,
                          notes=("data term not strongly convex",))
    r = epsilon / (alpha * sigma * sigma)
    lower = residual_l / (1 + residual_l)
    upper = (residual_l + 2) / (residual_l + 1)
    margin = min(r - lower, upper - r)
    verdict = SATISFIED if (lower < r < upper) else VIOLATED
    return GateReport("fbs-ryu", inputs, verdict, margin,
                      notes=("consumes the residual (Id - D) constant",))


def gate_admm_ryu(alpha, epsilon, sigma, residual_l, min_singular=1.0) -> GateReport:
    """Ratio condition for ADMM with a contractive-residual denoiser.

    Checks ``L/(1 + L(1 - 2L)) < epsilon/(alpha sigma^2)``, defined for
    residual constants L in [0, 1) and a strongly convex data term.  The
    report also carries the implied upper bound on alpha at the given
    epsilon and sigma.
    """
    inputs = {"alpha": alpha, "epsilon": epsilon, "sigma": sigma,
              "residual_l": residual_l, "min_singular": min_singular}
    if min_singular <= 0:
        return GateReport("admm-ryu", inputs, INAPPLICABLE,
                          notes=("data term not strongly convex",))
    if not 0 <= residual_l < 1:
        return GateReport("admm-ryu", inputs, INAPPLICABLE,
                          notes=("requires residual constant L in [0, 1)",))
    denom = 1 + residual_l * (1 - 2 * residual_l)
    r = epsilon / (alpha * sigma * sigma)
    lower = residual_l / denom
    margin = r - lower
    verdict = SATISFIED if r > lower else VIOLATED
    notes = ["consumes the residual (Id - D) constant"]
    if residual_l > 0:
        alpha_bound = epsilon * denom / (sigma * sigma * residual_l)
        inputs = dict(inputs, alpha_bound=alpha_bound)
        notes.append("satisfied iff alpha < alpha_bound")
    return GateReport("admm-ryu", inputs, verdict, margin, notes=tuple(notes))


def gate_xu_mmse(alpha, epsilon, sigma, opnorm_ata) -> GateReport:
    """Step condition for forward-backward with an exact MMSE denoiser.

    Checks ``epsilon * ||A* A|| / (alpha sigma^2) <= 1``; with unit-norm
    operators this is ``alpha >= epsilon / sigma^2``.  The underlying
    theory additionally assumes the denoiser is the exact posterior mean,
    which the report notes.
    """
    inputs = {"alpha": alpha, "epsilon": epsilon, "sigma": sigma,
              "opnorm_ata": opnorm_ata}
    ratio = epsilon * opnorm_ata / (alpha * sigma * sigma)
    margin = 1 - ratio
    verdict = SATISFIED if ratio <= 1 else VIOLATED
    return GateReport("xu-mmse", inputs, verdict, margin,
                      notes=("theory assumes an exact MMSE denoiser",))


def check_tweedie(denoiser: Denoiser, reference_score, points) -> float:
    """Max deviation of (D(x)-x)/eps from a reference score over test points.

    ``reference_score`` is any independently computed gradient of the log
    smoothed prior (closed form, quadrature or finite differences).
    """
    points = list(points)
    if not points:
        raise ConfigurationError("need at least one test point")
    worst = 0.0
    for x in points:
        x = np.asarray(x, dtype=np.float64)
        deviation = denoiser_score(denoiser, x) - np.asarray(reference_score(x))
        worst = max(worst, float(np.linalg.norm(deviation.ravel())))
    return worst


def mmse_gap(denoiser: Denoiser, reference: Denoiser, points) -> float:
    """Max of ||D(x) - D*(x)|| over a test set, D* an exact MMSE denoiser.

    This is an empirical lower bound on the uniform approximation error
    that controls the asymptotic bias of the stochastic scheme.
    """
    if not getattr(reference, "is_exact_mmse", False):
        raise ConfigurationError("reference denoiser must be an exact MMSE map")
    points = list(points)
    if not points:
        raise ConfigurationError("need at least one test point")
    worst = 0.0
    for x in points:
        x = np.asarray(x, dtype=np.float64)
        gap = denoiser(x) - reference(x)
        worst = max(worst, float(np.linalg.norm(gap.ravel())))
    return worst


def neg_log_posterior_smoothed(lik, denoiser, alpha, x) -> float:
    """Surrogate objective F(x, y) - alpha * log p_eps(x).

    Only available for denoisers exposing the exact smoothed prior
    (Gaussian and Gaussian-mixture MMSE kinds).
    """
    if not hasattr(denoiser, "log_smoothed_prior"):
        raise ConfigurationError(
            "objective needs a denoiser with a closed-form smoothed prior"
        )
    return lik.value(x) - alpha * denoiser.log_smoothed_prior(x)
