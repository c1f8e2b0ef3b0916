"""Data-fidelity terms: value, gradient, Lipschitz constant and proximal maps.

Two likelihood models are provided.  ``GaussianLikelihood`` covers denoising
and deblurring, where the negative log-likelihood is the quadratic
``||A x - y||^2 / (2 sigma^2)``.  ``HardConstraintLikelihood`` covers
noiseless inpainting, where the data term is the indicator of the affine set
of grids agreeing with the observed pixels; its prox is the projection onto
that set and does not depend on the prox step.

The regularisation weight alpha never enters here: solvers fold alpha into
the step or prox parameter they pass in, so there is exactly one canonical
definition of each data term.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigurationError, ShapeMismatchError
from .operators import CircularConvolution, Identity, Mask, MaskSplit


class GaussianLikelihood:
    """Quadratic data term ``||A x - y||^2 / (2 sigma^2)``."""

    def __init__(self, op, y, sigma: float):
        if sigma <= 0:
            raise ConfigurationError("noise level sigma must be > 0")
        self.op = op
        self.y = np.asarray(y, dtype=np.float64)
        self.sigma = float(sigma)

    @property
    def gradient_lipschitz(self) -> float:
        """Lipschitz constant of the gradient: ||A* A|| / sigma^2."""
        return self.op.opnorm_AtA / self.sigma**2

    def value(self, x) -> float:
        r = self.op(x) - self.y
        return float(np.sum(r * r)) / (2.0 * self.sigma**2)

    def grad(self, x) -> np.ndarray:
        """A* (A x - y) / sigma^2."""
        residual = self.op(x) - self.y
        if residual.shape != self.y.shape:
            raise ShapeMismatchError("observation shape does not match operator output")
        return self.op.adjoint(residual) / self.sigma**2

    def prox(self, v, gamma: float) -> np.ndarray:
        """argmin_x ||A x - y||^2/(2 sigma^2) + ||x - v||^2/(2 gamma).

        Solved exactly: pixelwise for identity and mask operators,
        frequency-pointwise for circular convolution.
        """
        if gamma <= 0:
            raise ConfigurationError("prox step gamma must be > 0")
        v = np.asarray(v, dtype=np.float64)
        c = gamma / self.sigma**2
        if isinstance(self.op, Identity):
            if v.shape != self.y.shape:
                raise ShapeMismatchError("input shape does not match observation")
            return (v + c * self.y) / (1.0 + c)
        if isinstance(self.op, Mask):
            split = self.op.split
            out = v.copy().ravel()
            out[split.observed] = (out[split.observed] + c * self.y) / (1.0 + c)
            return out.reshape(split.shape)
        if isinstance(self.op, CircularConvolution):
            t = self.op.transfer
            v_hat = np.fft.fft2(v)
            y_hat = np.fft.fft2(self.y)
            x_hat = (v_hat + c * np.conj(t) * y_hat) / (1.0 + c * np.abs(t) ** 2)
            return np.fft.ifft2(x_hat).real
        raise ConfigurationError(
            f"no closed-form prox for operator kind {type(self.op).__name__}"
        )


class HardConstraintLikelihood:
    """Indicator of the set of grids whose observed pixels equal y exactly."""

    def __init__(self, split: MaskSplit, y):
        self.split = split
        self.y = np.asarray(y, dtype=np.float64).ravel()
        if self.y.size != split.m:
            raise ShapeMismatchError("observation length does not match the mask")

    def feasible(self, x) -> bool:
        return bool(np.array_equal(self.split.observe(x), self.y))

    def value(self, x) -> float:
        return 0.0 if self.feasible(x) else float("inf")

    def prox(self, v, gamma: float | None = None) -> np.ndarray:
        """Projection onto the constraint set; independent of gamma.

        Observed pixels are set to y exactly (bitwise), hidden pixels are
        copied from the input.
        """
        return self.split.embed(self.split.hidden_values(v), self.y)

    def project(self, x) -> np.ndarray:
        """Projection onto the constraint set (the prox of an indicator)."""
        return self.prox(x)
