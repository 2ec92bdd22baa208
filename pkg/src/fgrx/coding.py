"""Discrete-BP code subgraph: mapping, interleaving, convolutional code, BCJR.

LLR sign convention: positive means bit 0 is more likely,
``llr = log P(b=0) - log P(b=1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numba
import numpy as np

from .numerics import DiscreteMessage, ScalarGaussian, MIN_VARIANCE

LLR_CLAMP = 40.0


class LengthMismatch(ValueError):
    pass


# ---------------------------------------------------------------- constellations


class Constellation:
    """Gray-labelled unit-energy constellation.

    ``points[i]`` carries the bit label ``labels[i]`` (MSB first).
    """

    def __init__(self, name: str, points, labels):
        self.name = name
        self.points = np.asarray(points, dtype=complex)
        self.labels = np.asarray(labels, dtype=np.int8)
        self.points.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def order(self) -> int:
        return self.points.shape[0]

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @cached_property
    def _label_index(self) -> np.ndarray:
        # label integer -> point index
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        idx = np.empty(self.order, dtype=np.int64)
        idx[self.labels @ weights] = np.arange(self.order)
        return idx

    def index_of_bits(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return self._label_index[bits @ weights]

    def __repr__(self):
        return f"Constellation({self.name!r})"


def _qpsk() -> Constellation:
    # 00, 01, 11, 10 counterclockwise starting in the first quadrant
    s = 1 / np.sqrt(2)
    points = [s * (1 + 1j), s * (-1 + 1j), s * (-1 - 1j), s * (1 - 1j)]
    labels = [[0, 0], [0, 1], [1, 1], [1, 0]]
    return Constellation("QPSK", points, labels)


def _qam16() -> Constellation:
    # per-axis Gray pairs; first two bits pick I, last two pick Q
    axis = {(0, 0): -3, (0, 1): -1, (1, 1): 1, (1, 0): 3}
    points, labels = [], []
    for (b0, b1), i in axis.items():
        for (b2, b3), q in axis.items():
            points.append((i + 1j * q) / np.sqrt(10))
            labels.append([b0, b1, b2, b3])
    return Constellation("QAM16", points, labels)


CONSTELLATIONS = {"QPSK": _qpsk(), "QAM16": _qam16()}


def get_constellation(name: str) -> Constellation:
    try:
        return CONSTELLATIONS[name]
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}") from None


def map_symbols(bits, constellation: Constellation) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.size % constellation.bits_per_symbol:
        raise ValueError("bit count is not a multiple of bits per symbol")
    return constellation.points[constellation.index_of_bits(bits)]


def bits_of_points(indices, constellation: Constellation) -> np.ndarray:
    return constellation.labels[np.asarray(indices)].reshape(-1)


# ---------------------------------------------------------------- bit <-> symbol messages


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def symbol_log_prior(llrs, constellation: Constellation) -> np.ndarray:
    """Log weights of each constellation point from per-bit LLRs.

    ``llrs`` has shape ``(n_sym * bits_per_symbol,)``; returns normalised
    log weights of shape ``(n_sym, order)``.
    """
    q = constellation.bits_per_symbol
    lam = np.asarray(llrs, dtype=float).reshape(-1, q)
    sign = 1.0 - 2.0 * constellation.labels.T  # (q, order): +1 for bit 0
    logp = _log_sigmoid(lam[:, :, None] * sign[None, :, :]).sum(axis=1)
    return logp - np.logaddexp.reduce(logp, axis=1, keepdims=True)


def symbol_prior(p_zero, constellation: Constellation):
    """Prior over constellation points from bit probabilities P(bit = 0).

    ``p_zero`` has shape ``(bits_per_symbol,)`` for a single symbol (returns a
    DiscreteMessage) or ``(n_sym, bits_per_symbol)`` (returns an
    ``(n_sym, order)`` weight array).
    """
    p0 = np.asarray(p_zero, dtype=float)
    single = p0.ndim == 1
    p0 = np.atleast_2d(p0)
    labels = constellation.labels
    w = np.prod(np.where(labels[None, :, :] == 0, p0[:, None, :], 1.0 - p0[:, None, :]), axis=2)
    w = w / w.sum(axis=1, keepdims=True)
    if single:
        return DiscreteMessage(constellation.points, w[0])
    return w


def gaussian_log_weights(mean, var, constellation: Constellation) -> np.ndarray:
    """Evaluate CN(x; mean, var) on every constellation point (log, unnormalised)."""
    mean = np.asarray(mean, dtype=complex)
    var = np.maximum(np.asarray(var, dtype=float), MIN_VARIANCE)
    return -np.abs(constellation.points - mean[..., None]) ** 2 / var[..., None]


def bit_llrs_arrays(msg_logw, prior_logw, constellation: Constellation) -> np.ndarray:
    """Extrinsic bit LLRs from symbol-level messages.

    ``msg_logw`` and ``prior_logw`` have shape ``(n_sym, order)``; the prior
    must be in product-of-bits form (as produced by :func:`symbol_log_prior`).
    Returns clamped LLRs of shape ``(n_sym * bits_per_symbol,)``.
    """
    msg_logw = np.asarray(msg_logw, dtype=float)
    prior_logw = np.asarray(prior_logw, dtype=float)
    post = msg_logw + prior_logw
    out = np.empty((post.shape[0], constellation.bits_per_symbol))
    for b in range(constellation.bits_per_symbol):
        zero = constellation.labels[:, b] == 0
        post_llr = np.logaddexp.reduce(post[:, zero], axis=1) - np.logaddexp.reduce(post[:, ~zero], axis=1)
        prior_llr = np.logaddexp.reduce(prior_logw[:, zero], axis=1) - np.logaddexp.reduce(
            prior_logw[:, ~zero], axis=1
        )
        out[:, b] = post_llr - prior_llr
    out = np.nan_to_num(out, nan=0.0, posinf=LLR_CLAMP, neginf=-LLR_CLAMP)
    return np.clip(out, -LLR_CLAMP, LLR_CLAMP).reshape(-1)


def bit_llrs_from_symbol_message(msg, prior: DiscreteMessage | None, constellation: Constellation) -> np.ndarray:
    """Bit LLRs for one symbol, extrinsic with respect to ``prior``.

    ``msg`` is either a DiscreteMessage over the constellation or a
    ScalarGaussian evaluated on it. ``prior=None`` means uniform.
    """
    if isinstance(msg, ScalarGaussian):
        logw = gaussian_log_weights(np.array([msg.mean]), np.array([msg.variance]), constellation)
    else:
        if not np.allclose(msg.support, constellation.points):
            raise ValueError("message support does not match the constellation")
        with np.errstate(divide="ignore"):
            logw = np.log(msg.weights)[None, :]
    if prior is None:
        plogw = np.zeros((1, constellation.order))
    else:
        with np.errstate(divide="ignore"):
            plogw = np.log(prior.weights)[None, :]
    return bit_llrs_arrays(logw, plogw, constellation)


# ---------------------------------------------------------------- interleaver


class Interleaver:
    """Seeded pseudorandom permutation of a fixed block length."""

    def __init__(self, length: int, seed: int):
        self.length = int(length)
        self.perm = np.random.default_rng(seed).permutation(self.length)
        self.perm.setflags(write=False)

    def interleave(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.length:
            raise LengthMismatch(f"expected {self.length} entries, got {x.shape[0]}")
        return x[self.perm]

    def deinterleave(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[0] != self.length:
            raise LengthMismatch(f"expected {self.length} entries, got {y.shape[0]}")
        out = np.empty_like(y)
        out[self.perm] = y
        return out


# ---------------------------------------------------------------- convolutional code


@dataclass(frozen=True)
class CodeSpec:
    kind: Literal["ConvRate1_2"] = "ConvRate1_2"
    generators: tuple[int, int] = (0o7, 0o5)
    constraint_length: int = 3
    termination: Literal["zero-tail"] = "zero-tail"

    def __post_init__(self):
        if len(self.generators) != 2 or any(g <= 0 for g in self.generators):
            raise ValueError("rate-1/2 code needs two nonzero generators")
        if any(g >= 1 << self.constraint_length for g in self.generators):
            raise ValueError("generator exceeds constraint length")

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    def coded_length(self, n_info: int) -> int:
        return 2 * (n_info + self.memory)

    def info_length(self, n_coded: int) -> int:
        if n_coded % 2:
            raise LengthMismatch("coded length must be even")
        return n_coded // 2 - self.memory

    @cached_property
    def trellis(self):
        """``(next_state, outputs)`` tables, indexed ``[state, input]``.

        The state holds the last ``memory`` inputs, newest in the MSB.
        """
        m = self.memory
        n_states = 1 << m
        nxt = np.empty((n_states, 2), dtype=np.int64)
        out = np.empty((n_states, 2, 2), dtype=np.int64)
        for s in range(n_states):
            for u in range(2):
                reg = (u << m) | s  # register bits: newest input at position m
                for j, g in enumerate(self.generators):
                    out[s, u, j] = bin(reg & g).count("1") & 1
                nxt[s, u] = reg >> 1
        return nxt, out


def conv_encode(bits, spec: CodeSpec = CodeSpec()) -> np.ndarray:
    """Zero-tail encode; output interleaves the two generator streams."""
    bits = np.asarray(bits, dtype=np.int64)
    u = np.concatenate([bits, np.zeros(spec.memory, dtype=np.int64)])
    out = np.empty((u.size, 2), dtype=np.int8)
    K = spec.constraint_length
    for j, g in enumerate(spec.generators):
        taps = np.array([(g >> (K - 1 - i)) & 1 for i in range(K)], dtype=np.int64)
        out[:, j] = np.convolve(u, taps)[: u.size] & 1
    return out.reshape(-1)


@numba.njit(cache=True)
def _bcjr_kernel(llr, nxt, out, n_info):
    n_steps = llr.shape[0] // 2
    n_states = nxt.shape[0]
    neg = -1e300
    # branch log-metrics: 0.5 * sum_j (1 - 2 c_j) * llr_j
    alpha = np.full((n_steps + 1, n_states), neg)
    beta = np.full((n_steps + 1, n_states), neg)
    alpha[0, 0] = 0.0
    beta[n_steps, 0] = 0.0
    gam = np.empty((n_steps, n_states, 2))
    for t in range(n_steps):
        for s in range(n_states):
            for u in range(2):
                g = 0.0
                for j in range(2):
                    g += 0.5 * (1 - 2 * out[s, u, j]) * llr[2 * t + j]
                if t >= n_info and u == 1:
                    g = neg
                gam[t, s, u] = g
    for t in range(n_steps):
        for s in range(n_states):
            a = alpha[t, s]
            if a <= neg:
                continue
            for u in range(2):
                if gam[t, s, u] <= neg:
                    continue
                ns = nxt[s, u]
                v = a + gam[t, s, u]
                cur = alpha[t + 1, ns]
                if cur <= neg:
                    alpha[t + 1, ns] = v
                elif v > cur:
                    alpha[t + 1, ns] = v + np.log1p(np.exp(cur - v))
                else:
                    alpha[t + 1, ns] = cur + np.log1p(np.exp(v - cur))
        mx = alpha[t + 1].max()
        alpha[t + 1] -= mx
        for s in range(n_states):
            if alpha[t + 1, s] < -1e250:
                alpha[t + 1, s] = neg
    for t in range(n_steps - 1, -1, -1):
        for s in range(n_states):
            acc = neg
            for u in range(2):
                if gam[t, s, u] <= neg:
                    continue
                b = beta[t + 1, nxt[s, u]]
                if b <= neg:
                    continue
                v = gam[t, s, u] + b
                if acc <= neg:
                    acc = v
                elif v > acc:
                    acc = v + np.log1p(np.exp(acc - v))
                else:
                    acc = acc + np.log1p(np.exp(v - acc))
            beta[t, s] = acc
        mx = beta[t].max()
        beta[t] -= mx
        for s in range(n_states):
            if beta[t, s] < -1e250:
                beta[t, s] = neg
    info_post = np.zeros(n_info)
    coded_post = np.zeros(2 * n_steps)
    num = np.empty(2)  # info bit u = 0 / 1
    cnum = np.empty((2, 2))  # coded bit j, value c
    for t in range(n_steps):
        num[:] = neg
        cnum[:, :] = neg
        for s in range(n_states):
            a = alpha[t, s]
            if a <= neg:
                continue
            for u in range(2):
                if gam[t, s, u] <= neg:
                    continue
                b = beta[t + 1, nxt[s, u]]
                if b <= neg:
                    continue
                v = a + gam[t, s, u] + b
                if num[u] <= neg:
                    num[u] = v
                else:
                    hi = max(num[u], v)
                    num[u] = hi + np.log1p(np.exp(min(num[u], v) - hi))
                for j in range(2):
                    c = out[s, u, j]
                    cur = cnum[j, c]
                    if cur <= neg:
                        cnum[j, c] = v
                    else:
                        hi = max(cur, v)
                        cnum[j, c] = hi + np.log1p(np.exp(min(cur, v) - hi))
        if t < n_info:
            info_post[t] = num[0] - num[1]
        for j in range(2):
            coded_post[2 * t + j] = cnum[j, 0] - cnum[j, 1]
    return info_post, coded_post


def bcjr_posteriors(coded_llrs, spec: CodeSpec = CodeSpec()):
    """Unclamped log-domain forward-backward.

    Returns ``(info_posterior_llrs, coded_posterior_llrs)``.
    """
    llr = np.ascontiguousarray(coded_llrs, dtype=np.float64)
    if llr.ndim != 1 or llr.size % 2 or llr.size // 2 <= spec.memory:
        raise LengthMismatch(f"coded LLR block of length {llr.size} does not fit the code")
    n_info = spec.info_length(llr.size)
    nxt, out = spec.trellis
    info, coded = _bcjr_kernel(llr, nxt, out, n_info)
    # +-inf posteriors saturate to the clamp in the callers
    return info, coded


def bcjr_decode(coded_llrs, spec: CodeSpec = CodeSpec(), n_info: int | None = None):
    """Exact APP decoding of a zero-tail terminated rate-1/2 code.

    Returns ``(info_posterior_llrs, coded_extrinsic_llrs)``, both clamped
    to +-40.
    """
    llr = np.clip(np.asarray(coded_llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    if n_info is not None and spec.coded_length(n_info) != llr.size:
        raise LengthMismatch(f"expected {spec.coded_length(n_info)} coded LLRs, got {llr.size}")
    info, coded = bcjr_posteriors(llr, spec)
    extrinsic = coded - llr
    return np.clip(info, -LLR_CLAMP, LLR_CLAMP), np.clip(extrinsic, -LLR_CLAMP, LLR_CLAMP)

