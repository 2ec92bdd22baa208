"""Mean-field observation factors of the MIMO-OFDM graph.

Messages from the observation factors to the time-domain taps, tap
posteriors, per-subcarrier channel moments, and the messages from the
observation factors to the joint symbol vector. The per-symbol
interference-cancellation message of the prior-art construction lives here
too, since it is also an observation-factor MF message.

Resource elements are flattened to an index ``r``; callers pass ``D[k_r]``
rows so the same kernels work on any subset of the grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ScalarGaussian, VectorGaussian, hermitian_solve


@dataclass(frozen=True)
class TapMessage:
    phi: complex
    psi: float

    def __post_init__(self):
        if self.psi < 0 or not np.isfinite(self.psi) or not np.isfinite(self.phi):
            raise ValueError("tap message needs finite phi and psi >= 0")


@dataclass(frozen=True, eq=False)
class AuxObservationForm:
    """exp{-gamma (s^H W s - 2 Re[y^H Xi s])} for one resource element."""

    xi: np.ndarray  # (M, N)
    w_mat: np.ndarray  # (N, N)
    y_vec: np.ndarray  # (M,)
    gamma: float

    def gaussian(self) -> VectorGaussian:
        """CN(s; W^-1 Xi^H y, (gamma W)^-1)."""
        N = self.w_mat.shape[0]
        rhs = np.column_stack([self.xi.conj().T @ self.y_vec, np.eye(N)])
        sol = hermitian_solve(self.w_mat, rhs)
        return VectorGaussian(sol[:, 0], sol[:, 1:] / self.gamma)

    def log_weight(self, s) -> np.ndarray:
        """Unnormalised log weight of candidate vectors ``s`` (shape (..., N))."""
        s = np.asarray(s, dtype=complex)
        quad = np.einsum("...i,ij,...j->...", s.conj(), self.w_mat, s).real
        lin = (s @ (self.xi.T @ self.y_vec.conj())).real
        return -self.gamma * (quad - 2.0 * lin)


# ---------------------------------------------------------------- observation -> tap


def obs_to_tap_arrays(y_m, mu_s, R_s, hf_m, tap_mean_l, d_l, gamma, n):
    """Precision and precision-weighted mean of the messages to tap (m, n, l).

    Parameters
    ----------
    y_m : (R,) observations of antenna m.
    mu_s : (R, N) symbol belief means.
    R_s : (R, N, N) symbol belief second moments, ``R[i, j] = E[s_i s_j^*]``.
    hf_m : (R, N) current frequency-domain channel means of antenna m.
    tap_mean_l : current mean of tap (m, n, l).
    d_l : (R,) DFT entries d_{k_r, l}.

    Returns ``(psi, psi_phi)``, each (R,). ``phi`` itself is ``psi_phi / psi``
    and is undefined on resources where antenna n is silent (psi = 0).
    """
    rho_nn = R_s[:, n, n].real
    # sum_{n'} rho_{n',n} h~_{mn'}; the n' = n term is put back below minus tap l
    cross = np.einsum("ri,ri->r", R_s[:, :, n], hf_m)
    psi_phi = gamma * (np.conj(d_l) * (y_m * np.conj(mu_s[:, n]) - cross) + rho_nn * tap_mean_l)
    return gamma * rho_nn, psi_phi


def obs_to_tap(y, mu_s, R_s, tap_means, D, gamma, m, n, l, k) -> TapMessage:
    """Message from the observation factor at subcarrier ``k`` to tap h_mn(l).

    ``y`` is the (M,) observation vector, ``mu_s``/``R_s`` the symbol belief
    moments at that resource, ``tap_means`` the (M, N, L) current tap means.
    """
    y = np.asarray(y, dtype=complex)
    hf = tap_means[m] @ D[k]  # (N,)
    psi, psi_phi = obs_to_tap_arrays(
        y[m : m + 1], np.asarray(mu_s)[None], np.asarray(R_s)[None], hf[None], tap_means[m, n, l], D[k, l : l + 1], gamma, n
    )
    psi = float(psi[0])
    phi = complex(psi_phi[0] / psi) if psi > 0 else 0j
    return TapMessage(phi, psi)


def tap_posterior(prior: ScalarGaussian, messages) -> ScalarGaussian:
    """Combine the tap prior with all observation messages."""
    if prior.variance <= 0:
        raise ValueError("tap prior needs positive variance")
    prec = 1.0 / prior.variance
    acc = prior.mean * prec
    for msg in messages:
        prec += msg.psi
        acc += msg.psi * msg.phi
    return ScalarGaussian(acc / prec, 1.0 / prec)


def mf_channel_sweep(y, mu_s, R_s, D_rows, gamma, tap_mean, tap_var, prior_var, n_sweeps=1):
    """Gauss-Seidel MF updates of all taps in (n, m, l) order.

    Parameters
    ----------
    y : (M, R) observations on the participating resources.
    mu_s, R_s : symbol belief moments on those resources.
    D_rows : (R, L) DFT rows of each resource's subcarrier.
    tap_mean, tap_var : (M, N, L) current tap beliefs (not modified).
    prior_var : (L,) tap prior variances (zero-mean prior).

    Returns updated ``(tap_mean, tap_var)``.
    """
    M, N, L = tap_mean.shape
    mean = np.array(tap_mean, dtype=complex)
    var = np.array(tap_var, dtype=float)
    prior_prec = 1.0 / np.maximum(prior_var, 1e-12)
    hf = np.einsum("mnl,rl->mrn", mean, D_rows)  # (M, R, N)
    for _ in range(n_sweeps):
        for n in range(N):
            psi_sum = gamma * R_s[:, n, n].real.sum()
            for m in range(M):
                for l in range(L):
                    d_l = D_rows[:, l]
                    _, psi_phi = obs_to_tap_arrays(y[m], mu_s, R_s, hf[m], mean[m, n, l], d_l, gamma, n)
                    prec = psi_sum + prior_prec[l]
                    new = psi_phi.sum() / prec
                    hf[m, :, n] += (new - mean[m, n, l]) * d_l
                    mean[m, n, l] = new
                    var[m, n, l] = 1.0 / prec
    return mean, var


def freq_channel_moments(tap_mean, tap_var, D):
    """Per-subcarrier means (M, N, K) and variances (M, N) of h~_mn(k)."""
    return tap_mean @ D.T, np.asarray(tap_var).sum(axis=-1)


# ---------------------------------------------------------------- observation -> symbols


def aux_forms_arrays(y_r, hf_r, hvar):
    """Batched Xi, W and Xi^H y for resources ``r``.

    ``y_r`` is (R, M), ``hf_r`` is (R, M, N) channel means, ``hvar`` is (M, N).
    """
    W = np.einsum("rmi,rmj->rij", hf_r.conj(), hf_r)
    idx = np.arange(hf_r.shape[2])
    W[:, idx, idx] += hvar.sum(axis=0)
    b = np.einsum("rmi,rm->ri", hf_r.conj(), y_r)
    return W, b


def obs_to_aux_symbol(k, t, freq_mean, freq_var, y, gamma) -> AuxObservationForm:
    """Observation -> joint-symbol message at resource (k, t).

    ``freq_mean`` is (M, N, K), ``freq_var`` (M, N), ``y`` the (M, K, T) grid.
    """
    xi = np.asarray(freq_mean)[:, :, k]
    W = xi.conj().T @ xi + np.diag(np.asarray(freq_var).sum(axis=0))
    return AuxObservationForm(xi, W, np.asarray(y)[:, k, t], gamma)


def mf_obs_to_symbol_arrays(y_r, hf_r, hvar, mu_x, gamma):
    """Per-stream interference-cancellation messages.

    ``y_r`` (R, M), ``hf_r`` (R, M, N), ``hvar`` (M, N), ``mu_x`` (R, N) the
    posterior means of all streams. Returns means and variances, (R, N).
    Only the interferers' means enter; their variances never do.
    """
    energy = (np.abs(hf_r) ** 2 + hvar[None]).sum(axis=1)  # (R, N)
    full = np.einsum("rmn,rn->rm", hf_r, mu_x)  # sum over all streams
    resid = y_r[:, :, None] - full[:, :, None] + hf_r * mu_x[:, None, :]  # (R, M, N)
    mean = np.einsum("rmn,rmn->rn", hf_r.conj(), resid) / energy
    return mean, 1.0 / (gamma * energy)


def mf_obs_to_symbol(k, t, n, freq_mean, freq_var, mu_x, y, gamma) -> ScalarGaussian:
    """Observation -> symbol x_n(k, t) message (single resource).

    ``mu_x`` holds the posterior means of all N streams at (k, t); entry n is
    ignored.
    """
    hf = np.asarray(freq_mean)[None, :, :, k]
    mean, var = mf_obs_to_symbol_arrays(np.asarray(y)[None, :, k, t], hf, np.asarray(freq_var), np.asarray(mu_x)[None], gamma)
    return ScalarGaussian(mean[0, n], var[0, n])
