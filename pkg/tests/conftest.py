"""Shared test helpers: trivial denoisers and brute-force oracles."""

import numpy as np
import pytest

from pnpmap.denoisers import Denoiser


class IdentityDenoiser(Denoiser):
    """D(x) = x; Lipschitz 1, residual 0."""

    lipschitz_bound = 1.0
    residual_lipschitz_bound = 0.0

    def __init__(self, epsilon=1.0):
        self.epsilon = float(epsilon)

    def __call__(self, x):
        return np.array(x, dtype=np.float64)


class QuadraticProxDenoiser(Denoiser):
    """D(x) = x / (1 + eps * lam): the prox of the quadratic lam*||x||^2/2.

    Linear, so both Lipschitz constants are exact.
    """

    def __init__(self, lam, epsilon):
        self.lam = float(lam)
        self.epsilon = float(epsilon)
        self.lipschitz_bound = 1.0 / (1.0 + epsilon * lam)
        self.residual_lipschitz_bound = 1.0 - self.lipschitz_bound

    def __call__(self, x):
        return np.asarray(x, dtype=np.float64) / (1.0 + self.epsilon * self.lam)


def circular_convolve_direct(x, kernel):
    """O(n^2 k^2) spatial circular convolution; the FFT route's oracle.

    The kernel's centre tap is at (kh//2, kw//2), matching the operator.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    h, w = x.shape
    kh, kw = kernel.shape
    cy, cx = kh // 2, kw // 2
    out = np.zeros_like(x)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(kh):
                for b in range(kw):
                    acc += kernel[a, b] * x[(i - (a - cy)) % h, (j - (b - cx)) % w]
            out[i, j] = acc
    return out


def finite_difference_gradient(f, x, step=1e-5):
    """Central-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    xf = x.ravel()
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        fp = f(x)
        xf[i] = orig - step
        fm = f(x)
        xf[i] = orig
        flat[i] = (fp - fm) / (2.0 * step)
    return grad


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
