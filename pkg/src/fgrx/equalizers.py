"""Equalization factors: exact discrete BP and Gaussian BP.

The equality factor ties each component of the joint symbol vector to its
symbol variable. With discrete symbols the sum-product rule enumerates all
``|X|^N`` joint vectors; with Gaussian symbols it reduces to LMMSE filtering
with the incoming symbol messages acting as priors. The same Gaussian
machinery estimates the joint channel vector of the single-antenna model.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .coding import Constellation
from .mf import AuxObservationForm
from .numerics import (
    FLAT_VARIANCE,
    DiscreteMessage,
    ScalarGaussian,
    VectorGaussian,
    gaussian_divide_arrays,
    hermitian_solve,
    hermitian_solve_batched,
    normalize_log_weights,
)

DEFAULT_DOMAIN_CAP = 65536


class DomainTooLarge(ValueError):
    """The joint symbol domain exceeds the exact equalizer's cap; use the EP variant."""


def joint_support(constellation: Constellation, n_streams: int, cap: int = DEFAULT_DOMAIN_CAP):
    """All joint symbol vectors, row-major over streams.

    Returns ``(vectors, indices)`` of shape ``(|X|^N, N)``; row ``j``
    enumerates ``itertools.product`` order so log weights reshape to an
    ``N``-dimensional ``(|X|, ..., |X|)`` tensor.
    """
    size = constellation.order**n_streams
    if size > cap:
        raise DomainTooLarge(f"|X|^N = {size} exceeds the cap of {cap}")
    idx = np.array(list(itertools.product(range(constellation.order), repeat=n_streams)), dtype=np.int64)
    return constellation.points[idx], idx


@dataclass(frozen=True, eq=False)
class JointDiscreteMessage:
    vectors: np.ndarray  # (J, N)
    log_weights: np.ndarray  # (J,), max-subtracted
    constellation: Constellation

    @property
    def n_streams(self) -> int:
        return self.vectors.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return normalize_log_weights(self.log_weights)


# ---------------------------------------------------------------- discrete path


def joint_log_weights_arrays(W, b, gamma, vectors):
    """-gamma (s^H W s - 2 Re[b^H s]) for every resource and candidate.

    ``W`` (R, N, N), ``b = Xi^H y`` (R, N), ``vectors`` (J, N). Returns (R, J)
    max-subtracted log weights.
    """
    quad = np.einsum("ji,rik,jk->rj", vectors.conj(), W, vectors).real
    lin = np.einsum("ri,ji->rj", b.conj(), vectors).real
    lw = -gamma * (quad - 2.0 * lin)
    return lw - lw.max(axis=1, keepdims=True)


def _tensor(logw, Q, N):
    return logw.reshape((logw.shape[0],) + (Q,) * N)


def _prior_sum(prior_logw, Q, N, skip=None):
    """Sum of per-stream prior log weights broadcast onto the joint tensor."""
    R = prior_logw.shape[0]
    total = np.zeros((R,) + (Q,) * N)
    for i in range(N):
        if i == skip:
            continue
        shape = [R] + [1] * N
        shape[i + 1] = Q
        total = total + prior_logw[:, i, :].reshape(shape)
    return total


def discrete_extrinsic_arrays(logw, prior_logw, Q):
    """Extrinsic per-stream log messages from joint log weights.

    ``logw`` (R, Q^N), ``prior_logw`` (R, N, Q). Returns normalised log
    messages (R, N, Q).
    """
    R, N = prior_logw.shape[:2]
    t = _tensor(logw, Q, N)
    out = np.empty((R, N, Q))
    for n in range(N):
        total = t + _prior_sum(prior_logw, Q, N, skip=n)
        axes = tuple(a + 1 for a in range(N) if a != n)
        out[:, n, :] = logsumexp(total, axis=axes) if axes else total
    return out - logsumexp(out, axis=2, keepdims=True)


def discrete_posterior_arrays(logw, prior_logw, Q):
    """Normalised joint posterior weights (R, Q^N) = joint message x priors."""
    R, N = prior_logw.shape[:2]
    total = _tensor(logw, Q, N) + _prior_sum(prior_logw, Q, N)
    return normalize_log_weights(total.reshape(R, -1), axis=1)


def joint_moments_arrays(post, vectors):
    """Mean (R, N) and second moment (R, N, N) of joint posteriors."""
    mu = post @ vectors
    R_s = np.einsum("rj,ji,jk->rik", post, vectors, vectors.conj())
    return mu, R_s


def discrete_joint_message(
    form: AuxObservationForm, constellation: Constellation, n_streams: int, cap: int = DEFAULT_DOMAIN_CAP
) -> JointDiscreteMessage:
    vectors, _ = joint_support(constellation, n_streams, cap)
    b = form.xi.conj().T @ form.y_vec
    lw = joint_log_weights_arrays(form.w_mat[None], b[None], form.gamma, vectors)[0]
    return JointDiscreteMessage(vectors, lw, constellation)


def _prior_log_array(priors, constellation):
    with np.errstate(divide="ignore"):
        return np.stack([np.log(p.weights) for p in priors])[None]  # (1, N, Q)


def discrete_extrinsic(joint: JointDiscreteMessage, priors, n: int) -> DiscreteMessage:
    """Sum-product message from the equality factor to symbol ``n``."""
    const = joint.constellation
    plog = _prior_log_array(priors, const)
    ext = discrete_extrinsic_arrays(joint.log_weights[None], plog, const.order)
    return DiscreteMessage.from_log_weights(const.points, ext[0, n])


# ---------------------------------------------------------------- Gaussian path


def gbp_posterior_info(prec_aux, shift_aux, prior_mean, prior_var):
    """Joint posterior from an information-form aux message and diagonal priors.

    ``prec_aux`` (R, N, N) is the aux precision, ``shift_aux`` (R, N) its
    precision-times-mean. Returns posterior mean (R, N) and covariance
    (R, N, N) with a single batched solve.
    """
    R, N = shift_aux.shape
    idx = np.arange(N)
    lam = np.array(prec_aux, dtype=complex)
    lam[:, idx, idx] += 1.0 / prior_var
    eta = shift_aux + prior_mean / prior_var
    rhs = np.concatenate([eta[:, :, None], np.broadcast_to(np.eye(N), (R, N, N))], axis=2)
    sol = hermitian_solve_batched(lam, rhs)
    cov = sol[:, :, 1:]
    cov = 0.5 * (cov + np.swapaxes(cov.conj(), 1, 2))
    return sol[:, :, 0], cov


def gbp_extrinsic_arrays(post_mean, post_cov, prior_mean, prior_var):
    """Marginal / incoming for every component; falls back to the marginal."""
    marg_var = np.real(np.diagonal(post_cov, axis1=1, axis2=2))
    mean, var, ok = gaussian_divide_arrays(post_mean, marg_var, prior_mean, prior_var)
    return mean, var, ok


def _info_form(g):
    if isinstance(g, AuxObservationForm):
        # exact information form; stays finite when W is singular
        return g.gamma * g.w_mat, g.gamma * (g.xi.conj().T @ g.y_vec)
    d = g.dim
    sol = hermitian_solve(g.covariance, np.column_stack([g.mean, np.eye(d)]))
    prec = sol[:, 1:]
    return 0.5 * (prec + prec.conj().T), sol[:, 0]


def gbp_joint_posterior(aux_msg, incoming) -> VectorGaussian:
    """Posterior of the joint vector: aux message times the incoming priors.

    ``aux_msg`` is a VectorGaussian or an AuxObservationForm; the latter is
    used in information form, so a rank-deficient ``W`` is fine.
    """
    incoming = list(incoming)
    prec, shift = _info_form(aux_msg)
    if len(incoming) != shift.shape[0]:
        raise ValueError("one incoming message per component is required")
    if any(m.variance <= 0 for m in incoming):
        raise ValueError("incoming variances must be positive")
    pm = np.array([m.mean for m in incoming])[None]
    pv = np.array([m.variance for m in incoming])[None]
    mean, cov = gbp_posterior_info(prec[None], shift[None], pm, pv)
    return VectorGaussian(mean[0], cov[0])


def gbp_extrinsic(posterior: VectorGaussian, incoming_n: ScalarGaussian, n: int) -> ScalarGaussian:
    mean, var, _ = gbp_extrinsic_arrays(
        posterior.mean[None, n : n + 1],
        posterior.covariance[None, n : n + 1, n : n + 1],
        np.array([[incoming_n.mean]]),
        np.array([[incoming_n.variance]]),
    )
    return ScalarGaussian(mean[0, 0], var[0, 0])


def aux_belief(posterior, priors=None):
    """Belief moments ``(mu_s, R_s)`` sent back to the observation factor.

    ``posterior`` is either a Gaussian joint posterior (VectorGaussian) or a
    JointDiscreteMessage, in which case ``priors`` (one DiscreteMessage per
    stream, or None for uniform) are multiplied in first.
    """
    if isinstance(posterior, VectorGaussian):
        return posterior.mean.copy(), posterior.covariance + np.outer(posterior.mean, posterior.mean.conj())
    const = posterior.constellation
    N = posterior.n_streams
    if priors is None:
        plog = np.zeros((1, N, const.order))
    else:
        plog = _prior_log_array(priors, const)
    post = discrete_posterior_arrays(posterior.log_weights[None], plog, const.order)
    mu, R_s = joint_moments_arrays(post, posterior.vectors)
    return mu[0], R_s[0]


def gbp_channel_estimate(obs_msgs, tap_priors):
    """Gaussian BP on the channel equality factor of the single-antenna model.

    ``obs_msgs`` are the observation -> joint-channel messages, either
    VectorGaussians or AuxObservationForms in the channel variable (multiplied
    together as the extrinsic input of the equality factor); ``tap_priors``
    are the per-coefficient prior messages. Returns
    ``(extrinsics, posterior)``: the per-coefficient messages leaving the
    equality factor and the joint posterior handed back to the observation
    factors.
    """
    priors = list(tap_priors)
    N = len(priors)
    prec = np.zeros((N, N), dtype=complex)
    shift = np.zeros(N, dtype=complex)
    for g in obs_msgs:
        p, s = _info_form(g)
        prec += p
        shift += s
    pm = np.array([m.mean for m in priors])[None]
    pv = np.array([m.variance for m in priors])[None]
    if not np.any(prec):
        prec = np.eye(N) / FLAT_VARIANCE
    mean, cov = gbp_posterior_info(prec[None], shift[None], pm, pv)
    ext_mean, ext_var, _ = gbp_extrinsic_arrays(mean, cov, pm, pv)
    extrinsics = [ScalarGaussian(ext_mean[0, n], ext_var[0, n]) for n in range(N)]
    return extrinsics, VectorGaussian(mean[0], cov[0])
