"""Image grids and the linear forward operators used by the likelihoods.

Images are plain 2-D float64 numpy arrays with intensities nominally in
[0, 1].  Values are never clamped during computation; clamping happens only
when a grid is exported to an 8-bit file (see :mod:`pnpmap.io`).

Every operator implements a forward/adjoint pair satisfying
``<A x, v> == <x, A* v>``.  Convolution uses periodic boundary conditions,
which makes the operator diagonal in the Fourier basis and gives all
proximal maps a closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, NumericError, ShapeMismatchError


def as_grid(x, name: str = "image") -> np.ndarray:
    """Validate and return ``x`` as a finite 2-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains NaN or Inf")
    return arr


def _require_shape(x, shape, name: str = "image") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ShapeMismatchError(
            f"{name} has shape {arr.shape}, operator expects {tuple(shape)}"
        )
    return arr


class LinearOperator:
    """Base class for the forward maps.

    Subclasses set ``shape`` (the domain grid shape, or None if shape
    agnostic), ``opnorm_AtA`` (the exact operator norm of A*A) and
    ``min_singular`` (the smallest singular value of A, used to decide
    strong convexity of the quadratic data term).
    """

    shape = None
    opnorm_AtA = None
    min_singular = None

    def __call__(self, x):
        raise NotImplementedError

    def adjoint(self, v):
        raise NotImplementedError


class Identity(LinearOperator):
    """The identity map; works on arrays of any shape."""

    kind = "identity"
    opnorm_AtA = 1.0
    min_singular = 1.0

    def __init__(self, shape=None):
        self.shape = tuple(shape) if shape is not None else None

    def __call__(self, x):
        return _require_shape(x, self.shape).copy()

    def adjoint(self, v):
        return _require_shape(v, self.shape).copy()


class CircularConvolution(LinearOperator):
    """2-D circular convolution with a fixed stencil.

    The kernel's centre tap sits at index ``(kh // 2, kw // 2)``; an impulse
    is spread onto the kernel footprint centred on the impulse, wrapping
    periodically at the borders.  Application is done in the frequency
    domain, so apply/adjoint cost one FFT round trip each.
    """

    kind = "circular-convolution"

    def __init__(self, kernel, shape):
        kernel = as_grid(kernel, name="kernel")
        self.shape = tuple(int(s) for s in shape)
        kh, kw = kernel.shape
        h, w = self.shape
        if kh > h or kw > w:
            raise ShapeMismatchError(
                f"kernel {kernel.shape} larger than grid {self.shape}"
            )
        self.kernel = kernel
        embedded = np.zeros(self.shape)
        embedded[:kh, :kw] = kernel
        embedded = np.roll(embedded, (-(kh // 2), -(kw // 2)), axis=(0, 1))
        self.transfer = np.fft.fft2(embedded)
        gains = np.abs(self.transfer)
        self.opnorm_AtA = float(np.max(gains) ** 2)
        self.min_singular = float(np.min(gains))

    def __call__(self, x):
        x = _require_shape(x, self.shape)
        return np.fft.ifft2(np.fft.fft2(x) * self.transfer).real

    def adjoint(self, v):
        v = _require_shape(v, self.shape)
        return np.fft.ifft2(np.fft.fft2(v) * np.conj(self.transfer)).real


def uniform_kernel(size: int) -> np.ndarray:
    """A size x size averaging stencil with unit DC gain."""
    if size < 1:
        raise ConfigurationError("kernel size must be >= 1")
    return np.full((size, size), 1.0 / (size * size))


@dataclass(frozen=True)
class MaskSplit:
    """A partition of the pixel indices into observed and hidden sets.

    ``observed`` selects the measured pixels (the rows kept from the
    identity matrix); ``hidden`` is its complement.  Scattering the two
    index sets back always reassembles the full grid exactly:
    ``embed(hidden_values(x), observe(x)) == x``.
    """

    shape: tuple
    observed: np.ndarray
    hidden: np.ndarray = field(init=False)

    def __post_init__(self):
        obs = np.unique(np.asarray(self.observed, dtype=np.intp))
        d = int(np.prod(self.shape))
        if obs.size == 0 or obs.size > d:
            raise ConfigurationError("observed index set must be nonempty and <= d")
        if obs[0] < 0 or obs[-1] >= d:
            raise ConfigurationError("observed indices out of range")
        mask = np.zeros(d, dtype=bool)
        mask[obs] = True
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "hidden", np.flatnonzero(~mask))

    @classmethod
    def random(cls, shape, hidden_fraction: float, rng) -> "MaskSplit":
        """Draw a uniform mask hiding ``hidden_fraction`` of the pixels."""
        if not 0.0 < hidden_fraction < 1.0:
            raise ConfigurationError("hidden fraction must lie in (0, 1)")
        d = int(np.prod(shape))
        m = int(round((1.0 - hidden_fraction) * d))
        m = min(max(m, 1), d - 1)
        observed = rng.choice(d, size=m, replace=False)
        return cls(shape=tuple(shape), observed=observed)

    @property
    def m(self) -> int:
        return int(self.observed.size)

    @property
    def d(self) -> int:
        return int(np.prod(self.shape))

    def observe(self, x) -> np.ndarray:
        """Q x: the observed pixel values as a flat vector."""
        return _require_shape(x, self.shape).ravel()[self.observed].copy()

    def hidden_values(self, x) -> np.ndarray:
        """P x: the hidden pixel values as a flat vector."""
        return _require_shape(x, self.shape).ravel()[self.hidden].copy()

    def embed(self, hidden_values, observed_values) -> np.ndarray:
        """P* h + Q* y: reassemble a full grid from the two value vectors."""
        h = np.asarray(hidden_values, dtype=np.float64).ravel()
        y = np.asarray(observed_values, dtype=np.float64).ravel()
        if h.size != self.hidden.size or y.size != self.observed.size:
            raise ShapeMismatchError("value vectors do not match the split sizes")
        flat = np.empty(self.d)
        flat[self.hidden] = h
        flat[self.observed] = y
        return flat.reshape(self.shape)

    def scatter_observed(self, values) -> np.ndarray:
        """Q* y: observed values on a zero grid."""
        return self.embed(np.zeros(self.hidden.size), values)

    def scatter_hidden(self, values) -> np.ndarray:
        """P* h: hidden values on a zero grid."""
        return self.embed(values, np.zeros(self.observed.size))


class Mask(LinearOperator):
    """Row selection: maps a grid to the vector of observed pixels."""

    kind = "mask"
    opnorm_AtA = 1.0

    def __init__(self, split: MaskSplit):
        self.split = split
        self.shape = split.shape
        self.min_singular = 1.0 if split.m == split.d else 0.0

    def __call__(self, x):
        return self.split.observe(x)

    def adjoint(self, v):
        return self.split.scatter_observed(v)


def operator_norm_ata(op: LinearOperator, shape=None, tol: float = 1e-8,
                      max_iters: int = 20000, seed: int = 0) -> float:
    """Estimate ||A* A|| by power iteration to relative tolerance ``tol``.

    Provides an estimate independent of the closed forms stored on the
    operators, so the two can be cross-checked.  Raises
    :class:`NumericError` if the iteration does not settle.
    """
    shape = tuple(shape) if shape is not None else op.shape
    if shape is None:
        raise ConfigurationError("operator is shape agnostic; pass an explicit shape")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = op.adjoint(op(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # restart away from the null space
            v = rng.standard_normal(shape)
            v /= np.linalg.norm(v)
            continue
        lam_new = float(np.vdot(v, w).real)
        v = w / nw
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise NumericError(f"power iteration did not converge in {max_iters} iterations")
