import numpy as np

from fgrx.scalar import (
    mf_obs_to_channel,
    mf_obs_to_symbol_scalar,
    obs_to_joint_channel,
    obs_to_joint_symbols,
    run_auxiliary,
    run_standard,
    simulate_scalar,
    demo,
)
from oracles import crandn, lmmse_info_form


def test_symbol_message_variance_is_inverse_precision():
    mu_h = np.array([0.8 + 0.2j, -0.3j])
    rho_h = np.abs(mu_h) ** 2 + 0.1
    m = mf_obs_to_symbol_scalar(0.5 + 0.5j, mu_h, rho_h, np.array([0j, 0.7]), 4.0, 0)
    assert np.isclose(m.variance, 1 / (4.0 * rho_h[0]))
    assert np.isclose(m.mean, np.conj(mu_h[0]) * (0.5 + 0.5j - mu_h[1] * 0.7) / rho_h[0])


def test_channel_message_ignores_interferer_variance():
    mu_x = np.array([0.6 + 0.1j, -0.2 + 0.4j])
    mu_h = np.array([0.1, 0.9 - 0.3j])
    a = mf_obs_to_channel(0.3j, mu_x, np.abs(mu_x) ** 2 + [0.1, 0.1], mu_h, 2.0, 0)
    b = mf_obs_to_channel(0.3j, mu_x, np.abs(mu_x) ** 2 + [0.1, 1.0], mu_h, 2.0, 0)
    assert a == b


def test_joint_symbol_form_with_certain_channel_is_the_likelihood():
    rng = np.random.default_rng(50)
    h = crandn(rng, 2)
    y, gamma = crandn(rng), 3.0
    form = obs_to_joint_symbols(y, h, np.outer(h, h.conj()), gamma)
    s = crandn(rng, 20, 2)
    ll = -gamma * np.abs(y - s @ h) ** 2
    lw = form.log_weight(s)
    assert np.allclose(lw - lw[0], ll - ll[0])
    form = obs_to_joint_channel(y, s[0], np.outer(s[0], s[0].conj()), gamma)
    ll = -gamma * np.abs(y - s[0] @ s.T) ** 2  # candidates as channel vectors
    lw = form.log_weight(s)
    assert np.allclose(lw - lw[0], ll - ll[0])


def test_pilot_only_estimates_match_lmmse():
    sc = simulate_scalar(n_signals=2, n_obs=4, n_pilots=4, snr_db=10.0, seed=1)
    ref = lmmse_info_form(sc.x, sc.y, sc.gamma, np.zeros(2), np.ones(2))
    aux = run_auxiliary(sc, n_iters=1)
    std = run_standard(sc, n_iters=1)
    assert np.allclose(aux.channel[0], ref)
    # orthogonal pilots decouple the coefficients, so the MF estimate is exact too
    assert np.allclose(std.channel[0], ref)


def test_demo_traces():
    lines = []
    sc, (std, aux) = demo(out=lines.append)
    assert len(lines) == 1 + 2 * 4 + 1
    assert std.symbol_errors[-1] == 30 and aux.symbol_errors[-1] == 6
    assert aux.symbol_errors[-1] < std.symbol_errors[-1]
    assert lines[-1].startswith("interferer symbol variance x10")
    assert "standard 0.000e+00" in lines[-1] and "auxiliary 0.000e+00" not in lines[-1]
