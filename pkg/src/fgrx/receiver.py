"""Iterative reception of one MIMO-OFDM packet.

One iteration runs, in order: the MF channel sweep, the observation ->
detection messages, equalization, demapping and decoding, the return path
towards the equalizer and the export of symbol beliefs for the next channel
sweep. Data resources join the channel sweep only once the equalizer has
produced beliefs for them; before that they would contribute precision but
no evidence and drag the taps towards zero.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import coding
from .ep import ep_message_arrays, extrinsic_gaussian_arrays
from .equalizers import (
    DEFAULT_DOMAIN_CAP,
    discrete_extrinsic_arrays,
    discrete_posterior_arrays,
    gbp_extrinsic_arrays,
    gbp_posterior_info,
    joint_log_weights_arrays,
    joint_moments_arrays,
    joint_support,
)
from .mf import aux_forms_arrays, freq_channel_moments, mf_channel_sweep, mf_obs_to_symbol_arrays
from .numerics import discrete_moments_arrays, normalize_log_weights
from .sigmodel import ChannelTaps, ObservationGrid, SymbolGrid, SystemConfig, dft_matrix
from .coding import Interleaver


class InsufficientPilots(ValueError):
    pass


class ReceiverVariant(str, enum.Enum):
    MF_ORIGINAL = "MfOriginal"
    BP_MF_EXACT = "BpMfExact"
    BP_MF_EP = "BpMfEp"
    BP_MF_EXTRINSIC = "BpMfExtrinsic"
    KNOWN_CHANNEL_JMAP = "KnownChannelJmap"

    def __str__(self):
        return self.value


ALL_VARIANTS = tuple(ReceiverVariant)

INIT_MAX_SWEEPS = 50
INIT_TOL = 1e-12


@dataclass
class IterationRecord:
    info_decisions: np.ndarray | None  # (N, n_info), None without data
    tap_mean: np.ndarray
    tap_var: np.ndarray
    channel_mse: float | None
    bit_errors: int | None


@dataclass
class ReceiverTrace:
    variant: ReceiverVariant
    n_info_bits: int  # per packet, all streams
    iterations: list[IterationRecord] = field(default_factory=list)
    init_tap_mean: np.ndarray | None = None
    init_tap_var: np.ndarray | None = None

    @property
    def n_iters(self) -> int:
        return len(self.iterations)

    def ber(self, i: int = -1) -> float | None:
        rec = self.iterations[i]
        if rec.bit_errors is None or self.n_info_bits == 0:
            return None
        return rec.bit_errors / self.n_info_bits


def _layout_from_pilots(pilots: SymbolGrid):
    pilot_re = np.asarray(pilots.is_pilot).any(axis=0)
    data_k, data_t = np.nonzero(~pilot_re)
    pilot_k, pilot_t = np.nonzero(pilot_re)
    return pilot_re, (pilot_k, pilot_t), (data_k, data_t)


def init_from_pilots(obs: ObservationGrid, pilots: SymbolGrid, cfg: SystemConfig):
    """Pilot-only MF channel estimate, iterated to convergence.

    Returns ``(tap_mean, tap_var)`` of shape (M, N, L).
    """
    _, (pk, pt), _ = _layout_from_pilots(pilots)
    x = pilots.symbols[:, pk, pt].T  # (P, N)
    energy = (np.abs(x) ** 2).sum(axis=0)
    if np.any(energy == 0):
        missing = [int(n) for n in np.nonzero(energy == 0)[0]]
        raise InsufficientPilots(f"no pilot energy for transmit antenna(s) {missing}")
    D = dft_matrix(cfg.n_subcarriers, cfg.n_taps)
    y = obs.samples[:, pk, pt]
    R_s = x[:, :, None] * x[:, None, :].conj()
    mean = np.zeros((cfg.n_rx, cfg.n_tx, cfg.n_taps), dtype=complex)
    var = np.broadcast_to(cfg.pdp, mean.shape).astype(float)
    for _ in range(INIT_MAX_SWEEPS):
        new_mean, var = mf_channel_sweep(y, x, R_s, D[pk], obs.noise_precision, mean, var, cfg.pdp)
        delta = np.abs(new_mean - mean).max()
        mean = new_mean
        if delta <= INIT_TOL * max(1.0, np.abs(mean).max()):
            break
    return mean, var


def run_receiver(
    obs: ObservationGrid,
    pilots: SymbolGrid,
    cfg: SystemConfig,
    variant: ReceiverVariant | str,
    n_iters: int,
    *,
    true_taps: ChannelTaps | None = None,
    true_bits: np.ndarray | None = None,
    interleavers: list[Interleaver] | None = None,
    ep_damping: float = 0.0,
    domain_cap: int = DEFAULT_DOMAIN_CAP,
) -> ReceiverTrace:
    """Run ``n_iters`` receiver iterations of ``variant`` on one packet.

    ``pilots`` marks the pilot resources (``is_pilot``) and carries their
    known symbol vectors. ``true_taps`` is required by the known-channel
    variant and, when given, also yields per-iteration channel MSE;
    ``true_bits`` (N, n_info) yields bit error counts.
    """
    variant = ReceiverVariant(variant)
    if not 0 <= ep_damping < 1:
        raise ValueError("ep_damping must lie in [0, 1)")
    N, M, L = cfg.n_tx, cfg.n_rx, cfg.n_taps
    gamma = obs.noise_precision
    const = cfg.constellation_obj()
    Q, q = const.order, const.bits_per_symbol
    code = cfg.code_spec()
    D = dft_matrix(cfg.n_subcarriers, L)

    pilot_re, (pk, pt), (dk, dt) = _layout_from_pilots(pilots)
    n_data = dk.size
    n_coded = n_data * q
    n_info = n_coded // 2 - code.memory if n_coded else 0
    has_data = n_info > 0
    if has_data and interleavers is None:
        from .sigmodel import make_interleavers, resource_layout

        interleavers = make_interleavers(cfg, resource_layout(cfg))
    trace = ReceiverTrace(variant, N * n_info if has_data else 0)

    if variant is ReceiverVariant.BP_MF_EXACT or variant is ReceiverVariant.KNOWN_CHANNEL_JMAP:
        vectors, _ = joint_support(const, N, domain_cap)

    # all resources: pilots first, then data
    all_k = np.concatenate([pk, dk])
    all_t = np.concatenate([pt, dt])
    n_pil = pk.size
    y_all = obs.samples[:, all_k, all_t]  # (M, R)
    D_all = D[all_k]
    mu_s = np.zeros((all_k.size, N), dtype=complex)
    R_s = np.zeros((all_k.size, N, N), dtype=complex)
    xp = pilots.symbols[:, pk, pt].T
    mu_s[:n_pil] = xp
    R_s[:n_pil] = xp[:, :, None] * xp[:, None, :].conj()
    idx = np.arange(N)
    R_s[n_pil:, idx, idx] = np.mean(np.abs(const.points) ** 2)
    data_informed = False

    if variant is ReceiverVariant.KNOWN_CHANNEL_JMAP:
        if true_taps is None:
            raise ValueError("the known-channel variant needs true_taps")
        tap_mean = np.array(true_taps.taps, dtype=complex)
        tap_var = np.zeros(tap_mean.shape)
    else:
        tap_mean, tap_var = init_from_pilots(obs, pilots, cfg)
    trace.init_tap_mean, trace.init_tap_var = tap_mean.copy(), tap_var.copy()

    # per data resource and stream
    code_logw = np.full((n_data, N, Q), -np.log(Q))  # m_{f_C -> x}
    prior_mean = np.zeros((n_data, N), dtype=complex)  # n_{x -> f_S} (Gaussian variants)
    prior_var = np.ones((n_data, N))
    mu_post = np.zeros((n_data, N), dtype=complex)  # posterior means (MF original)
    y_d = obs.samples[:, dk, dt].T  # (R_d, M)

    for _ in range(n_iters):
        # 1. channel sweep
        if variant is not ReceiverVariant.KNOWN_CHANNEL_JMAP:
            use = slice(None) if data_informed else slice(0, n_pil)
            tap_mean, tap_var = mf_channel_sweep(
                y_all[:, use], mu_s[use], R_s[use], D_all[use], gamma, tap_mean, tap_var, cfg.pdp
            )
        hf, hvar = freq_channel_moments(tap_mean, tap_var, D)
        record = IterationRecord(None, tap_mean.copy(), tap_var.copy(), None, None)
        if true_taps is not None:
            record.channel_mse = float(np.mean(np.abs(tap_mean - true_taps.taps) ** 2))
        if not has_data:
            trace.iterations.append(record)
            continue

        hf_r = np.transpose(hf[:, :, dk], (2, 0, 1))  # (R_d, M, N)
        # 2-3. observation -> detection, equalization
        if variant is ReceiverVariant.MF_ORIGINAL:
            obs_mean, obs_var = mf_obs_to_symbol_arrays(y_d, hf_r, hvar, mu_post, gamma)
            msg_logw = coding.gaussian_log_weights(obs_mean, obs_var, const)
        else:
            W, b = aux_forms_arrays(y_d, hf_r, hvar)
            if variant in (ReceiverVariant.BP_MF_EXACT, ReceiverVariant.KNOWN_CHANNEL_JMAP):
                joint_logw = joint_log_weights_arrays(W, b, gamma, vectors)
                msg_logw = discrete_extrinsic_arrays(joint_logw, code_logw, Q)
            else:
                post_mean, post_cov = gbp_posterior_info(gamma * W, gamma * b, prior_mean, prior_var)
                cav_mean, cav_var, _ = gbp_extrinsic_arrays(post_mean, post_cov, prior_mean, prior_var)
                msg_logw = coding.gaussian_log_weights(cav_mean, cav_var, const)

        # 4. demapping and decoding
        decisions = np.empty((N, n_info), dtype=np.int8)
        new_code_logw = np.empty_like(code_logw)
        for n in range(N):
            llr = coding.bit_llrs_arrays(msg_logw[:, n, :], code_logw[:, n, :], const)
            info_llr, coded_ext = coding.bcjr_decode(interleavers[n].deinterleave(llr), code)
            decisions[n] = info_llr < 0
            new_code_logw[:, n, :] = coding.symbol_log_prior(interleavers[n].interleave(coded_ext), const)
        code_logw = new_code_logw
        record.info_decisions = decisions
        if true_bits is not None:
            record.bit_errors = int(np.count_nonzero(decisions != np.asarray(true_bits)))

        # 5-6. return path and belief export
        if variant is ReceiverVariant.MF_ORIGINAL:
            w = normalize_log_weights(code_logw + msg_logw, axis=-1)
            mu_post, var_post, _ = discrete_moments_arrays(const.points, w)
            mu_d = mu_post
            R_d = mu_post[:, :, None] * mu_post[:, None, :].conj()
            R_d[:, idx, idx] += var_post
        elif variant in (ReceiverVariant.BP_MF_EXACT, ReceiverVariant.KNOWN_CHANNEL_JMAP):
            post = discrete_posterior_arrays(joint_logw, code_logw, Q)
            mu_d, R_d = joint_moments_arrays(post, vectors)
        else:
            if variant is ReceiverVariant.BP_MF_EP:
                prev = (prior_mean, prior_var) if ep_damping else None
                prior_mean, prior_var, _ = ep_message_arrays(
                    code_logw, cav_mean, cav_var, const, damping=ep_damping, prev=prev
                )
            else:
                prior_mean, prior_var = extrinsic_gaussian_arrays(np.exp(code_logw), const.points)
            mu_d, cov_d = gbp_posterior_info(gamma * W, gamma * b, prior_mean, prior_var)
            R_d = cov_d + mu_d[:, :, None] * mu_d[:, None, :].conj()
        mu_s[n_pil:] = mu_d
        R_s[n_pil:] = R_d
        data_informed = True
        trace.iterations.append(record)
    return trace
