"""Complex Gaussian / discrete message algebra and small Hermitian solves.

Every subgraph of the receiver exchanges one of three message kinds:
scalar complex Gaussians, vector complex Gaussians and discrete
distributions over constellation points. The typed wrappers here enforce
the invariants; the ``*_arrays`` kernels are the vectorised forms the
receiver uses on whole resource grids.

Convention: circularly-symmetric complex Gaussians,
``CN(x; mu, v) = exp(-|x - mu|^2 / v) / (pi v)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# "no information" proxy; keeps all algebra finite
FLAT_VARIANCE = 1e12
# variance floor for emitted messages (point-mass beliefs)
MIN_VARIANCE = 1e-12
PSD_JITTER = 1e-10


class SingularMatrix(np.linalg.LinAlgError):
    """Raised when a Hermitian system cannot be factorised even after jitter."""


@dataclass(frozen=True)
class ScalarGaussian:
    mean: complex
    variance: float

    def __post_init__(self):
        mean = complex(self.mean)
        var = float(self.variance)
        if not (np.isfinite(mean.real) and np.isfinite(mean.imag) and np.isfinite(var)):
            raise ValueError(f"non-finite Gaussian parameters ({mean}, {var})")
        if var < 0:
            raise ValueError(f"negative variance {var}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def precision(self) -> float:
        return np.inf if self.variance == 0 else 1.0 / self.variance

    @classmethod
    def flat(cls) -> "ScalarGaussian":
        return cls(0.0, FLAT_VARIANCE)

    def logpdf(self, x):
        """Log density evaluated at ``x`` (scalar or array)."""
        v = max(self.variance, MIN_VARIANCE)
        return -np.abs(np.asarray(x) - self.mean) ** 2 / v - np.log(np.pi * v)


@dataclass(frozen=True)
class NegativeVarianceFlag:
    """Result of a Gaussian division whose precision came out non-positive.

    ``numerator`` is carried so the caller can fall back to it.
    """

    numerator: ScalarGaussian
    precision: float


@dataclass(frozen=True, eq=False)
class VectorGaussian:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=complex).reshape(-1)
        cov = np.asarray(self.covariance, dtype=complex)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match mean length {d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("non-finite VectorGaussian parameters")
        scale = max(np.abs(cov).max(), 1.0)
        if np.abs(cov - cov.conj().T).max() > 1e-12 * scale:
            raise ValueError("covariance is not Hermitian")
        cov = 0.5 * (cov + cov.conj().T)
        eig = np.linalg.eigvalsh(cov)
        if eig.size and eig[0] < -1e-10 * max(eig[-1], 0.0) - 1e-300:
            raise ValueError(f"covariance is not PSD (min eigenvalue {eig[0]:.3g})")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def flat(cls, d: int) -> "VectorGaussian":
        return cls(np.zeros(d), FLAT_VARIANCE * np.eye(d))

    def marginal(self, n: int) -> ScalarGaussian:
        return ScalarGaussian(self.mean[n], max(self.covariance[n, n].real, 0.0))


@dataclass(frozen=True, eq=False)
class DiscreteMessage:
    """Normalised weights over a finite support.

    ``support`` is 1-D for scalar symbols or 2-D ``(points, dim)`` for joint
    symbol vectors.
    """

    support: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=complex)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if support.shape[0] == 0:
            raise ValueError("empty support")
        if support.shape[0] != w.shape[0]:
            raise ValueError("support and weights differ in length")
        rows = support.reshape(support.shape[0], -1)
        if len({tuple(r) for r in rows.tolist()}) != rows.shape[0]:
            raise ValueError("support has duplicate points")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights sum to zero")
        w = w / total
        support.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_log_weights(cls, support, log_weights) -> "DiscreteMessage":
        lw = np.asarray(log_weights, dtype=float)
        return cls(support, np.exp(lw - lw.max()))

    @classmethod
    def uniform(cls, support) -> "DiscreteMessage":
        support = np.asarray(support)
        return cls(support, np.ones(support.shape[0]))


# ---------------------------------------------------------------- linear algebra


def _equilibrate(A: np.ndarray):
    """Symmetric Jacobi scaling ``S A S`` with unit diagonal.

    Scaling first keeps the rescue ridge and the singularity test independent
    of how unevenly the diagonal is scaled (precisions spanning many decades
    are common).
    """
    diag = np.real(np.diagonal(A, axis1=-2, axis2=-1))
    if np.any(diag <= 0):
        # a PSD matrix with a zero diagonal entry has a zero row
        raise SingularMatrix("non-positive diagonal entry")
    s = 1.0 / np.sqrt(diag)
    return A * s[..., :, None] * s[..., None, :], s


def _weak(L: np.ndarray) -> np.ndarray:
    piv = np.abs(np.diagonal(L, axis1=-2, axis2=-1)) ** 2
    return piv.min(axis=-1) <= 1e-12 * piv.max(axis=-1)


def _cholesky(As: np.ndarray) -> np.ndarray:
    """Cholesky of a batch of equilibrated matrices.

    Matrices that fail or are numerically singular are refactored with a
    small ridge; well-posed ones are left exact.
    """
    batch = As.shape[:-2]
    try:
        L = np.linalg.cholesky(As)
        bad = _weak(L)
    except np.linalg.LinAlgError:
        L = np.zeros_like(As)
        bad = np.zeros(batch, dtype=bool)
        for idx in np.ndindex(batch):
            try:
                L[idx] = np.linalg.cholesky(As[idx])
                bad[idx] = _weak(L[idx])
            except np.linalg.LinAlgError:
                bad[idx] = True
    if np.any(bad):
        try:
            Lj = np.linalg.cholesky(As[bad] + PSD_JITTER * np.eye(As.shape[-1]))
        except np.linalg.LinAlgError as exc:
            raise SingularMatrix(str(exc)) from exc
        if np.any(_weak(Lj)):
            raise SingularMatrix("matrix is numerically singular")
        L[bad] = Lj
    return L


def hermitian_solve_batched(A, B) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian PSD ``A`` over leading batch axes.

    ``A`` has shape ``(..., d, d)``, ``B`` has shape ``(..., d, k)``. Uses a
    Jacobi-scaled Cholesky; rank-deficient matrices get a relative ridge.
    Raises SingularMatrix for zero rows or non-finite input, which in
    practice means a degenerate message reached the solver.
    """
    A = np.asarray(A, dtype=complex)
    if not np.all(np.isfinite(A)):
        raise SingularMatrix("non-finite matrix")
    As, s = _equilibrate(0.5 * (A + np.swapaxes(A.conj(), -1, -2)))
    L = _cholesky(As)
    Z = np.linalg.solve(L, np.asarray(B, dtype=complex) * s[..., :, None])
    return np.linalg.solve(np.swapaxes(L.conj(), -1, -2), Z) * s[..., :, None]


def hermitian_solve(A, B) -> np.ndarray:
    """Single-matrix :func:`hermitian_solve_batched`; ``B`` may be a vector."""
    B = np.asarray(B, dtype=complex)
    X = hermitian_solve_batched(np.asarray(A)[None], (B[:, None] if B.ndim == 1 else B)[None])[0]
    return X[:, 0] if B.ndim == 1 else X


def second_moment_matrix(g: VectorGaussian) -> np.ndarray:
    """R = Sigma + mu mu^H."""
    return g.covariance + np.outer(g.mean, g.mean.conj())


# ---------------------------------------------------------------- scalar Gaussian algebra


def gaussian_combine_arrays(means, variances, axis=0):
    """Precision-weighted product of Gaussians along ``axis``."""
    means = np.asarray(means, dtype=complex)
    prec = 1.0 / np.asarray(variances, dtype=float)
    total = prec.sum(axis=axis)
    mean = (prec * means).sum(axis=axis) / total
    return mean, 1.0 / total


def gaussian_divide_arrays(num_mean, num_var, den_mean, den_var):
    """Elementwise Gaussian division.

    Returns ``(mean, var, ok)``; where ``ok`` is False the precision was
    non-positive and ``mean``/``var`` hold the numerator unchanged.
    """
    num_mean = np.asarray(num_mean, dtype=complex)
    num_var = np.asarray(num_var, dtype=float)
    prec = 1.0 / num_var - 1.0 / np.asarray(den_var, dtype=float)
    ok = prec > 0
    safe = np.where(ok, prec, 1.0)
    var = 1.0 / safe
    mean = var * (num_mean / num_var - np.asarray(den_mean) / den_var)
    return np.where(ok, mean, num_mean), np.where(ok, var, num_var), ok


def gaussian_combine(messages) -> ScalarGaussian:
    """Variable-node product of scalar Gaussian messages."""
    messages = list(messages)
    if not messages:
        raise ValueError("need at least one message")
    if any(m.variance <= 0 for m in messages):
        raise ValueError("gaussian_combine needs strictly positive variances")
    mean, var = gaussian_combine_arrays([m.mean for m in messages], [m.variance for m in messages])
    return ScalarGaussian(complex(mean), float(var))


def gaussian_divide(numerator: ScalarGaussian, denominator: ScalarGaussian):
    """Divide ``numerator`` by ``denominator``.

    Returns a ScalarGaussian, or a NegativeVarianceFlag carrying the
    numerator when the result would have non-positive precision.
    """
    if numerator.variance <= 0 or denominator.variance <= 0:
        raise ValueError("gaussian_divide needs strictly positive variances")
    prec = 1.0 / numerator.variance - 1.0 / denominator.variance
    if prec <= 0:
        return NegativeVarianceFlag(numerator, prec)
    var = 1.0 / prec
    mean = var * (numerator.mean / numerator.variance - denominator.mean / denominator.variance)
    return ScalarGaussian(mean, var)


# ---------------------------------------------------------------- discrete moments


def discrete_moments_arrays(points, weights, axis=-1):
    """Mean, variance and second moment of weights over ``points``.

    ``weights`` are assumed normalised along ``axis``; ``points`` broadcast
    against them.
    """
    points = np.asarray(points)
    mean = np.sum(weights * points, axis=axis)
    second = np.sum(weights * np.abs(points) ** 2, axis=axis)
    var = second - np.abs(mean) ** 2
    var = np.where(var < 0, 0.0, var)
    return mean, var, second


def discrete_moments(msg: DiscreteMessage):
    """Return ``(mean, variance, second_moment)`` of a scalar discrete message."""
    if msg.support.ndim != 1:
        raise ValueError("discrete_moments expects a scalar support")
    mean, var, second = discrete_moments_arrays(msg.support, msg.weights)
    return complex(mean), float(var), float(second)


def normalize_log_weights(logw, axis=-1):
    """Max-subtracted exponentiation and normalisation of log weights."""
    logw = np.asarray(logw, dtype=float)
    shifted = logw - logw.max(axis=axis, keepdims=True)
    w = np.exp(shifted)
    return w / w.sum(axis=axis, keepdims=True)
