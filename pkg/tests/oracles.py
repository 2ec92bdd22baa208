"""Independent reference implementations used by the tests.

Nothing here imports the package's message kernels: each oracle recomputes
its quantity from the model definition by enumeration, dense linear
algebra or a plain shift-register simulation.
"""
from __future__ import annotations

import itertools

import numpy as np


# ---------------------------------------------------------------- likelihoods / sum-product


def expected_loglik(y, h_mean, h_var, gamma, s):
    """E_h[-gamma |y - H s|^2] up to a constant, summed term by term.

    ``h_mean``/``h_var`` are (M, N) independent per-entry channel moments.
    """
    total = 0.0
    M, N = h_mean.shape
    for m in range(M):
        r = y[m]
        for n in range(N):
            r -= h_mean[m, n] * s[n]
        total += abs(r) ** 2
        for n in range(N):
            total += h_var[m, n] * abs(s[n]) ** 2
    # drop the s-independent |y|^2 so values are comparable with exponent forms
    return -gamma * (total - sum(abs(v) ** 2 for v in y))


def enumerate_joint(points, N):
    return [np.array(v) for v in itertools.product(points, repeat=N)]


def sum_product_extrinsic(loglik, vectors_idx, priors, n, Q):
    """sum_{s: s_n = a} exp(loglik(s)) prod_{i != n} prior_i(s_i), normalised."""
    out = np.zeros(Q)
    ref = max(loglik)
    for lw, idx in zip(loglik, vectors_idx):
        w = np.exp(lw - ref)
        for i, q in enumerate(idx):
            if i != n:
                w *= priors[i][q]
        out[idx[n]] += w
    return out / out.sum()


# ---------------------------------------------------------------- Gaussian references


def lmmse_posterior(H, y, gamma, prior_mean, prior_var):
    """Covariance-form LMMSE for y = H s + w, s ~ CN(prior_mean, diag(prior_var))."""
    P = np.diag(prior_var).astype(complex)
    S = H @ P @ H.conj().T + np.eye(H.shape[0]) / gamma
    G = P @ H.conj().T @ np.linalg.inv(S)
    mean = prior_mean + G @ (y - H @ prior_mean)
    cov = P - G @ H @ P
    return mean, cov


def lmmse_info_form(H, y, gamma, prior_mean, prior_var):
    """(gamma H^H H + P^-1)^-1 (gamma H^H y + P^-1 mu_p)."""
    Pinv = np.diag(1.0 / np.asarray(prior_var))
    A = gamma * H.conj().T @ H + Pinv
    return np.linalg.solve(A, gamma * H.conj().T @ y + Pinv @ prior_mean)


def tap_posterior_dense(y, x, D_rows, gamma, pdp):
    """Exact Gaussian posterior means of all taps with known symbols.

    ``y`` (M, R), ``x`` (R, N), ``D_rows`` (R, L). Returns (M, N, L).
    """
    M, R = y.shape
    N, L = x.shape[1], D_rows.shape[1]
    A = np.einsum("rn,rl->rnl", x, D_rows).reshape(R, N * L)
    Pinv = np.diag(np.tile(1.0 / np.asarray(pdp), N))
    out = np.empty((M, N, L), dtype=complex)
    for m in range(M):
        lhs = gamma * A.conj().T @ A + Pinv
        out[m] = np.linalg.solve(lhs, gamma * A.conj().T @ y[m]).reshape(N, L)
    return out


def mf_tap_message_by_expansion(y_m, joint_vectors, joint_w, hf_taps, d_row, gamma, n, l):
    """MF message to tap (n, l) from the expected log-likelihood as a quadratic in h.

    The expectation is taken by enumerating a joint discrete symbol belief
    (``joint_vectors`` (J, N) with weights ``joint_w``) with all other taps
    fixed at their means ``hf_taps`` (N, L). The exponent is
    ``-(alpha |h|^2 - 2 Re[beta^* h])`` up to a constant; the message is
    CN(beta / alpha, 1 / alpha) with psi = alpha.
    """

    def f(h):
        taps = hf_taps.copy()
        taps[n, l] = h
        coeff = taps @ d_row  # (N,) frequency response at this subcarrier
        e = 0.0
        for s, w in zip(joint_vectors, joint_w):
            e += w * abs(y_m - coeff @ s) ** 2
        return gamma * e

    c0 = f(0.0)
    alpha = 0.5 * (f(1.0) + f(-1.0)) - c0
    br = (f(-1.0) - f(1.0)) / 4
    bi = (f(-1j) - f(1j)) / 4
    beta = br + 1j * bi
    return beta / alpha, alpha


# ---------------------------------------------------------------- convolutional code


def shift_register_encode(bits, generators=(0o7, 0o5), K=3):
    """Feed-forward encoder simulated bit by bit, zero tail appended."""
    reg = [0] * K  # reg[0] newest
    taps = [[(g >> (K - 1 - i)) & 1 for i in range(K)] for g in generators]
    out = []
    for b in list(bits) + [0] * (K - 1):
        reg = [int(b)] + reg[:-1]
        for t in taps:
            out.append(sum(r * c for r, c in zip(reg, t)) % 2)
    return np.array(out, dtype=np.int8)


def viterbi(llrs, n_info, generators=(0o7, 0o5), K=3):
    """Soft-input Viterbi; maximises sum of +-llr/2 along zero-tail paths."""
    n_states = 1 << (K - 1)
    taps = [[(g >> (K - 1 - i)) & 1 for i in range(K)] for g in generators]
    metric = {0: 0.0}
    paths = {0: []}
    steps = len(llrs) // 2
    for t in range(steps):
        new_metric, new_paths = {}, {}
        for s, m in metric.items():
            state = [(s >> (K - 2 - i)) & 1 for i in range(K - 1)]  # newest first
            for u in ((0,) if t >= n_info else (0, 1)):
                reg = [u] + state
                bm = 0.0
                for j, tp in enumerate(taps):
                    c = sum(r * c_ for r, c_ in zip(reg, tp)) % 2
                    bm += 0.5 * (1 - 2 * c) * llrs[2 * t + j]
                ns = 0
                for bit in reg[:-1]:
                    ns = (ns << 1) | bit
                cand = m + bm
                if ns not in new_metric or cand > new_metric[ns]:
                    new_metric[ns] = cand
                    new_paths[ns] = paths[s] + [u]
        metric, paths = new_metric, new_paths
    assert len(metric) <= n_states
    return np.array(paths[0][:n_info], dtype=np.int8)


def app_by_enumeration(llrs, n_info, generators=(0o7, 0o5), K=3):
    """Exact info and coded-bit posterior LLRs by listing every codeword."""
    llrs = np.asarray(llrs, dtype=float)
    words, scores = [], []
    for info in itertools.product((0, 1), repeat=n_info):
        c = shift_register_encode(info, generators, K)
        words.append((np.array(info), c))
        scores.append(0.5 * np.sum((1 - 2 * c) * llrs))
    scores = np.array(scores)
    ref = scores.max()
    w = np.exp(scores - ref)
    info_llr = np.empty(n_info)
    coded_llr = np.empty(llrs.size)
    for i in range(n_info):
        z = sum(wk for wk, (u, _) in zip(w, words) if u[i] == 0)
        o = sum(wk for wk, (u, _) in zip(w, words) if u[i] == 1)
        info_llr[i] = np.log(z) - np.log(o)
    for j in range(llrs.size):
        z = sum(wk for wk, (_, c) in zip(w, words) if c[j] == 0)
        o = sum(wk for wk, (_, c) in zip(w, words) if c[j] == 1)
        coded_llr[j] = np.log(z) - np.log(o)
    return info_llr, coded_llr


# ---------------------------------------------------------------- random helpers


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_psd(rng, d, ridge=1.0):
    M = crandn(rng, d, d)
    return M.conj().T @ M + ridge * np.eye(d)
