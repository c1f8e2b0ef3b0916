"""Denoiser family: closed-form MMSE denoisers, non-local means, probing.

The closed-form denoisers (Gaussian and Gaussian-mixture priors) evaluate
the exact posterior mean under white Gaussian corruption of variance
epsilon.  Because they are exact MMSE maps, Tweedie's identity holds
exactly for them: ``(D(x) - x) / epsilon`` equals the gradient of the log
of the Gaussian-smoothed prior.  That makes them desk-scale ground truth
for everything downstream: score estimates, convergence conditions and the
solvers' stationary points can all be checked against closed forms.

Non-local means is included as a realistic approximate denoiser, and an
adapter for out-of-process denoisers lives in :mod:`pnpmap.external`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.special import logsumexp

from .exceptions import ConfigurationError, NumericError, ShapeMismatchError

_LOG_2PI = float(np.log(2.0 * np.pi))


class Denoiser:
    """Base class: an evaluable map x -> D(x) at a fixed noise level.

    ``lipschitz_bound`` and ``residual_lipschitz_bound`` are certified
    Lipschitz constants of D and of Id - D when known, else None.
    ``is_exact_mmse`` marks denoisers that evaluate the exact posterior
    mean of some prior; gap and identity checks require such a reference.
    """

    epsilon: float
    lipschitz_bound = None
    residual_lipschitz_bound = None
    is_exact_mmse = False

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError


def denoiser_score(denoiser: Denoiser, x) -> np.ndarray:
    """Score estimate (D(x) - x) / epsilon (Tweedie's identity).

    For exact MMSE denoisers this equals the gradient of the log of the
    smoothed prior; for approximate denoisers it is the plug-in estimate.
    """
    if denoiser.epsilon <= 0:
        raise ConfigurationError("denoiser epsilon must be > 0")
    x = np.asarray(x, dtype=np.float64)
    return (denoiser(x) - x) / denoiser.epsilon


class GaussianMMSEDenoiser(Denoiser):
    """Exact MMSE denoiser for an i.i.d. pixelwise Gaussian prior N(mu, tau2).

    The map is affine: D(x) = (tau2 * x + eps * mu) / (tau2 + eps), so both
    Lipschitz constants are exact, and the score of the smoothed prior has
    the closed form -(x - mu) / (tau2 + eps).
    """

    is_exact_mmse = True

    def __init__(self, mean, prior_var: float, epsilon: float):
        if prior_var <= 0 or epsilon <= 0:
            raise ConfigurationError("prior variance and epsilon must be > 0")
        self.mean = np.asarray(mean, dtype=np.float64)
        self.prior_var = float(prior_var)
        self.epsilon = float(epsilon)
        total = self.prior_var + self.epsilon
        self.lipschitz_bound = self.prior_var / total
        self.residual_lipschitz_bound = self.epsilon / total

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        total = self.prior_var + self.epsilon
        return (self.prior_var * x + self.epsilon * self.mean) / total

    def exact_score(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return -(x - self.mean) / (self.prior_var + self.epsilon)

    def log_smoothed_prior(self, x) -> float:
        """log of the smoothed prior density at x (Gaussian, normalised)."""
        x = np.asarray(x, dtype=np.float64)
        s = self.prior_var + self.epsilon
        sq = np.sum((x - self.mean) ** 2)
        return float(-0.5 * sq / s - 0.5 * x.size * (_LOG_2PI + np.log(s)))


class GmmMMSEDenoiser(Denoiser):
    """Exact MMSE denoiser for a Gaussian mixture prior.

    In ``pixelwise`` mode (the default) every pixel carries the same 1-D
    mixture prior and the map acts elementwise.  In ``vector`` mode the
    mixture lives on the flattened input with isotropic components; this
    mode is restricted to dimensions <= 256.

    Responsibilities are computed with log-sum-exp stabilisation, so the
    output stays finite for any finite input.
    """

    is_exact_mmse = True
    MAX_VECTOR_DIM = 256

    def __init__(self, weights, means, variances, epsilon: float,
                 mode: str = "pixelwise"):
        if mode not in ("pixelwise", "vector"):
            raise ConfigurationError(f"unknown GMM mode {mode!r}")
        self.mode = mode
        self.weights = np.asarray(weights, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        if epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        self.epsilon = float(epsilon)
        if mode == "pixelwise":
            self.means = np.asarray(means, dtype=np.float64)
            if self.means.ndim != 1:
                raise ConfigurationError("pixelwise mode expects scalar component means")
        else:
            self.means = np.stack([np.asarray(m, dtype=np.float64).ravel() for m in means])
            if self.means.shape[1] > self.MAX_VECTOR_DIM:
                raise ConfigurationError(
                    f"vector mode supports d <= {self.MAX_VECTOR_DIM}"
                )
        k = self.weights.size
        if self.variances.size != k or len(self.means) != k:
            raise ConfigurationError("weights, means and variances must align")
        if np.any(self.weights <= 0) or np.any(self.variances <= 0):
            raise ConfigurationError("weights and variances must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError("mixture weights must sum to 1")

    # -- pixelwise internals -------------------------------------------------

    def _log_joint_pixelwise(self, v: np.ndarray) -> np.ndarray:
        """log(w_j * N(v; mu_j, tau_j^2 + eps)) stacked over components."""
        s = self.variances + self.epsilon            # (k,)
        v = v[..., None]                             # (..., 1)
        return (np.log(self.weights) - 0.5 * (_LOG_2PI + np.log(s))
                - 0.5 * (v - self.means) ** 2 / s)   # (..., k)

    def responsibilities(self, x) -> np.ndarray:
        """Posterior component probabilities, last axis indexing components."""
        x = np.asarray(x, dtype=np.float64)
        if self.mode == "pixelwise":
            log_joint = self._log_joint_pixelwise(x)
            return np.exp(log_joint - logsumexp(log_joint, axis=-1, keepdims=True))
        flat = x.ravel()
        self._check_vector_dim(flat)
        s = self.variances + self.epsilon
        log_joint = (np.log(self.weights)
                     - 0.5 * flat.size * (_LOG_2PI + np.log(s))
                     - 0.5 * np.sum((flat - self.means) ** 2, axis=1) / s)
        return np.exp(log_joint - logsumexp(log_joint))

    def _check_vector_dim(self, flat):
        if flat.size != self.means.shape[1]:
            raise ShapeMismatchError(
                f"vector-mode input has {flat.size} entries, prior expects "
                f"{self.means.shape[1]}"
            )

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        r = self.responsibilities(x)
        s = self.variances + self.epsilon
        if self.mode == "pixelwise":
            post = (self.variances * x[..., None] + self.epsilon * self.means) / s
            return np.sum(r * post, axis=-1)
        flat = x.ravel()
        post = (self.variances[:, None] * flat + self.epsilon * self.means) / s[:, None]
        return (r @ post).reshape(x.shape)

    def exact_score(self, x) -> np.ndarray:
        """Gradient of log of the smoothed prior, in closed form."""
        x = np.asarray(x, dtype=np.float64)
        r = self.responsibilities(x)
        s = self.variances + self.epsilon
        if self.mode == "pixelwise":
            return np.sum(r * (self.means - x[..., None]) / s, axis=-1)
        flat = x.ravel()
        contrib = (self.means - flat) / s[:, None]
        return (r @ contrib).reshape(x.shape)

    def log_smoothed_prior(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if self.mode == "pixelwise":
            return float(np.sum(logsumexp(self._log_joint_pixelwise(x), axis=-1)))
        flat = x.ravel()
        self._check_vector_dim(flat)
        s = self.variances + self.epsilon
        log_joint = (np.log(self.weights)
                     - 0.5 * flat.size * (_LOG_2PI + np.log(s))
                     - 0.5 * np.sum((flat - self.means) ** 2, axis=1) / s)
        return float(logsumexp(log_joint))

    def log_density_second_derivative(self, v) -> np.ndarray:
        """d^2/dv^2 log p_eps(v) for the 1-D pixel mixture (pixelwise mode)."""
        if self.mode != "pixelwise":
            raise ConfigurationError("second derivative is for pixelwise mode")
        v = np.asarray(v, dtype=np.float64)
        r = self.responsibilities(v)
        s = self.variances + self.epsilon
        a = (self.means - v[..., None]) / s          # d log phi_j / dv
        first = np.sum(r * a, axis=-1)               # (log p)'
        second_raw = np.sum(r * (a**2 - 1.0 / s), axis=-1)  # p''/p
        return second_raw - first**2

    @property
    def residual_lipschitz_bound(self):
        """Empirical sup of |d/dv (v - D(v))| over a dense scan (pixelwise).

        The residual derivative equals -eps * (log p_eps)''(v), which tends
        to eps/(tau_j^2+eps) far from the data, so the scan interval is
        padded by several smoothed standard deviations.  Vector mode
        returns None (no cheap certificate).
        """
        if self.mode != "pixelwise":
            return None
        if not hasattr(self, "_residual_bound"):
            s = self.variances + self.epsilon
            pad = 8.0 * float(np.sqrt(s.max()))
            grid = np.linspace(self.means.min() - pad, self.means.max() + pad, 20001)
            interior = np.max(np.abs(self.epsilon * self.log_density_second_derivative(grid)))
            tail = float(np.max(self.epsilon / s))
            self._residual_bound = float(max(interior, tail))
        return self._residual_bound


class NonLocalMeansDenoiser(Denoiser):
    """Patch-weighted averaging with a Gaussian kernel on patch distances.

    The bandwidth defaults to h^2 = 10 * epsilon.  Patch distances are mean
    squared differences over (2*patch_radius+1)^2 windows; shifts and patch
    sums use periodic boundaries, consistent with the circular convolution
    model used elsewhere.
    """

    def __init__(self, epsilon: float, patch_radius: int = 1,
                 search_radius: int = 5, bandwidth2: float | None = None):
        if epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        self.epsilon = float(epsilon)
        self.patch_radius = int(patch_radius)
        self.search_radius = int(search_radius)
        self.bandwidth2 = float(bandwidth2) if bandwidth2 is not None else 10.0 * epsilon
        if self.bandwidth2 <= 0:
            raise ConfigurationError("bandwidth^2 must be > 0")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeMismatchError("non-local means expects a 2-D grid")
        size = 2 * self.patch_radius + 1
        num = np.zeros_like(x)
        den = np.zeros_like(x)
        for dy in range(-self.search_radius, self.search_radius + 1):
            for dx in range(-self.search_radius, self.search_radius + 1):
                shifted = np.roll(x, (dy, dx), axis=(0, 1))
                dist = uniform_filter((x - shifted) ** 2, size=size, mode="wrap")
                w = np.exp(-dist / self.bandwidth2)
                num += w * shifted
                den += w
        return num / den


@dataclass(frozen=True)
class LipschitzProbeReport:
    """Empirical lower bounds on the Lipschitz constants of D and Id - D."""

    empirical_l: float
    empirical_residual_l: float
    probes: int
    step: float


def probe_lipschitz(denoiser: Denoiser, samples, probes_per_sample: int = 8,
                    step: float = 1e-4, seed: int = 0) -> LipschitzProbeReport:
    """Probe finite-difference ratios of D and Id - D along random directions.

    Returns the maxima over all probes, which are lower bounds on the true
    constants by construction.  For linear denoisers the probe recovers the
    operator norm up to the step's rounding error.
    """
    if step <= 0:
        raise ConfigurationError("probe step must be > 0")
    samples = list(samples)
    if not samples:
        raise ConfigurationError("need at least one probe sample")
    rng = np.random.default_rng(seed)
    max_l = 0.0
    max_res = 0.0
    count = 0
    for x in samples:
        x = np.asarray(x, dtype=np.float64)
        base = denoiser(x)
        for _ in range(probes_per_sample):
            u = rng.standard_normal(x.shape)
            u /= np.linalg.norm(u)
            perturbed = denoiser(x + step * u)
            if not np.all(np.isfinite(perturbed)):
                raise NumericError("denoiser produced non-finite values while probing")
            diff = perturbed - base
            max_l = max(max_l, float(np.linalg.norm(diff)) / step)
            residual_diff = step * u - diff
            max_res = max(max_res, float(np.linalg.norm(residual_diff)) / step)
            count += 1
    return LipschitzProbeReport(empirical_l=max_l, empirical_residual_l=max_res,
                                probes=count, step=step)
