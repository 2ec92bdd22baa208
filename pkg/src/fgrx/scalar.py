"""Single-observation-per-symbol interference model and its two receivers.

``y(k) = sum_n h_n x_n(k) + w(k)`` with flat channel coefficients ``h_n``.
The standard construction keeps the observation factor in the MF part and
exchanges per-variable messages; the auxiliary construction sends joint
messages to an exact discrete equalizer and to a Gaussian BP channel
estimator. Used by ``fgrx demo-scalar`` and as a small test bed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import Constellation, get_constellation
from .equalizers import aux_belief, discrete_joint_message, gbp_channel_estimate
from .mf import AuxObservationForm
from .numerics import DiscreteMessage, ScalarGaussian, discrete_moments_arrays


@dataclass(frozen=True, eq=False)
class ScalarScenario:
    h: np.ndarray  # (N,)
    x: np.ndarray  # (K, N)
    y: np.ndarray  # (K,)
    n_pilots: int  # leading observations with known symbols
    gamma: float
    constellation: Constellation


def simulate_scalar(n_signals=2, n_obs=12, n_pilots=4, snr_db=10.0, seed=0, constellation="QPSK"):
    rng = np.random.default_rng(seed)
    const = get_constellation(constellation)
    h = (rng.standard_normal(n_signals) + 1j * rng.standard_normal(n_signals)) / np.sqrt(2)
    x = const.points[rng.integers(const.order, size=(n_obs, n_signals))]
    # orthogonal pilots: one active signal per pilot observation
    for k in range(n_pilots):
        x[k] = 0
        x[k, k % n_signals] = const.points[0]
    gamma = 10.0 ** (snr_db / 10.0)
    w = (rng.standard_normal(n_obs) + 1j * rng.standard_normal(n_obs)) * np.sqrt(0.5 / gamma)
    return ScalarScenario(h, x, x @ h + w, n_pilots, gamma, const)


# ---------------------------------------------------------------- standard construction


def mf_obs_to_channel(y, mu_x, rho_x, mu_h, gamma, n) -> ScalarGaussian:
    """f_Y -> h_n for one observation. Only the other signals' means enter."""
    resid = y - sum(mu_h[j] * mu_x[j] for j in range(len(mu_h)) if j != n)
    if rho_x[n] <= 0:
        return ScalarGaussian.flat()
    return ScalarGaussian(np.conj(mu_x[n]) * resid / rho_x[n], 1.0 / (gamma * rho_x[n]))


def mf_obs_to_symbol_scalar(y, mu_h, rho_h, mu_x, gamma, n) -> ScalarGaussian:
    """f_Y -> x_n for one observation; precision gamma * E|h_n|^2."""
    resid = y - sum(mu_h[j] * mu_x[j] for j in range(len(mu_h)) if j != n)
    return ScalarGaussian(np.conj(mu_h[n]) * resid / rho_h[n], 1.0 / (gamma * rho_h[n]))


# ---------------------------------------------------------------- auxiliary construction


def obs_to_joint_symbols(y, mu_q, R_q, gamma) -> AuxObservationForm:
    """f_Y -> s: exp{-gamma (s^H conj(R_q) s - 2 Re[y^* mu_q^T s])}, R_q = E[q q^H]."""
    mu_q = np.asarray(mu_q, dtype=complex)
    return AuxObservationForm(mu_q[None, :], np.conj(R_q), np.array([y]), gamma)


def obs_to_joint_channel(y, mu_s, R_s, gamma) -> AuxObservationForm:
    """f_Y -> q, the same form with the roles of s and q swapped."""
    mu_s = np.asarray(mu_s, dtype=complex)
    return AuxObservationForm(mu_s[None, :], np.conj(R_s), np.array([y]), gamma)


# ---------------------------------------------------------------- receivers


@dataclass
class ScalarTrace:
    name: str
    channel: list = field(default_factory=list)  # per iteration: (N,) means
    channel_var: list = field(default_factory=list)
    symbol_errors: list = field(default_factory=list)
    lines: list = field(default_factory=list)


def _hard(points, mu):
    return points[np.abs(mu[..., None] - points).argmin(axis=-1)]


def run_standard(sc: ScalarScenario, n_iters=4, prior_var=1.0) -> ScalarTrace:
    K, N = sc.x.shape
    pts = sc.constellation.points
    tr = ScalarTrace("standard")
    mu_x = np.zeros((K, N), dtype=complex)
    rho_x = np.ones((K, N))
    mu_x[: sc.n_pilots] = sc.x[: sc.n_pilots]
    rho_x[: sc.n_pilots] = np.abs(sc.x[: sc.n_pilots]) ** 2
    mu_h = np.zeros(N, dtype=complex)
    var_h = np.full(N, prior_var)
    first = True
    for it in range(n_iters):
        # pilots only until data beliefs exist
        rows = range(sc.n_pilots) if first else range(K)
        for n in range(N):
            msgs = [mf_obs_to_channel(sc.y[k], mu_x[k], rho_x[k], mu_h, sc.gamma, n) for k in rows]
            prec = 1.0 / prior_var + sum(m.precision for m in msgs)
            mu_h[n] = sum(m.mean * m.precision for m in msgs) / prec
            var_h[n] = 1.0 / prec
        rho_h = np.abs(mu_h) ** 2 + var_h
        for k in range(sc.n_pilots, K):
            for n in range(N):
                m = mf_obs_to_symbol_scalar(sc.y[k], mu_h, rho_h, mu_x[k], sc.gamma, n)
                logw = -np.abs(pts - m.mean) ** 2 / m.variance
                w = np.exp(logw - logw.max())
                mean, var, _ = discrete_moments_arrays(pts, w / w.sum())
                mu_x[k, n], rho_x[k, n] = mean, var + abs(mean) ** 2
        first = False
        errs = int(np.count_nonzero(_hard(pts, mu_x[sc.n_pilots :]) != sc.x[sc.n_pilots :]))
        tr.channel.append(mu_h.copy())
        tr.channel_var.append(var_h.copy())
        tr.symbol_errors.append(errs)
        tr.lines.append(_fmt(tr.name, it + 1, mu_h, var_h, errs))
    return tr


def run_auxiliary(sc: ScalarScenario, n_iters=4, prior_var=1.0) -> ScalarTrace:
    K, N = sc.x.shape
    const = sc.constellation
    tr = ScalarTrace("auxiliary")
    mu_s = np.zeros((K, N), dtype=complex)
    R_s = np.broadcast_to(np.eye(N, dtype=complex), (K, N, N)).copy()
    for k in range(sc.n_pilots):
        mu_s[k] = sc.x[k]
        R_s[k] = np.outer(sc.x[k], sc.x[k].conj())
    priors = [ScalarGaussian(0j, prior_var)] * N
    uniform = [DiscreteMessage.uniform(const.points)] * N
    first = True
    for it in range(n_iters):
        rows = range(sc.n_pilots) if first else range(K)
        forms = [obs_to_joint_channel(sc.y[k], mu_s[k], R_s[k], sc.gamma) for k in rows]
        _, q_post = gbp_channel_estimate(forms, priors)
        R_q = q_post.covariance + np.outer(q_post.mean, q_post.mean.conj())
        for k in range(sc.n_pilots, K):
            joint = discrete_joint_message(obs_to_joint_symbols(sc.y[k], q_post.mean, R_q, sc.gamma), const, N)
            mu_s[k], R_s[k] = aux_belief(joint, uniform)
        first = False
        var_h = np.real(np.diag(q_post.covariance))
        errs = int(np.count_nonzero(_hard(const.points, mu_s[sc.n_pilots :]) != sc.x[sc.n_pilots :]))
        tr.channel.append(q_post.mean.copy())
        tr.channel_var.append(var_h)
        tr.symbol_errors.append(errs)
        tr.lines.append(_fmt(tr.name, it + 1, q_post.mean, var_h, errs))
    return tr


def _fmt(name, it, mean, var, errs):
    h = " ".join(f"{m.real:+.4f}{m.imag:+.4f}j (var {v:.2e})" for m, v in zip(mean, var))
    return f"{name:9s} iter {it}: h = [{h}] symbol errors {errs}"


def demo(seed=3, snr_db=6.0, n_iters=4, out=print):
    sc = simulate_scalar(n_signals=2, n_obs=24, n_pilots=4, snr_db=snr_db, seed=seed)
    out(f"true h = [{' '.join(f'{h.real:+.4f}{h.imag:+.4f}j' for h in sc.h)}], "
        f"SNR {snr_db} dB, {sc.x.shape[0] - sc.n_pilots} data observations, N = {sc.x.shape[1]}")
    traces = [run_standard(sc, n_iters), run_auxiliary(sc, n_iters)]
    for tr in traces:
        for line in tr.lines:
            out(line)
    # cancellation uses only the interferer's mean: scale its variance by 10
    k = sc.n_pilots
    mu_x = np.array([0.3 + 0.2j, -0.4 + 0.1j])
    changes = []
    for v2 in (0.1, 1.0):
        rho = np.abs(mu_x) ** 2 + np.array([0.1, v2])
        std = mf_obs_to_channel(sc.y[k], mu_x, rho, traces[0].channel[-1], sc.gamma, 0)
        R_s = np.outer(mu_x, mu_x.conj()) + np.diag([0.1, v2])
        form = obs_to_joint_channel(sc.y[k], mu_x, R_s, sc.gamma)
        ext, _ = gbp_channel_estimate([form], [ScalarGaussian(0j, 1.0)] * 2)
        changes.append((std, ext[0]))
    d_std = abs(changes[1][0].mean - changes[0][0].mean) + abs(changes[1][0].variance - changes[0][0].variance)
    d_aux = abs(changes[1][1].mean - changes[0][1].mean) + abs(changes[1][1].variance - changes[0][1].variance)
    out(f"interferer symbol variance x10 -> change of the h_1 message: standard {d_std:.3e}, auxiliary {d_aux:.3e}")
    return sc, traces
