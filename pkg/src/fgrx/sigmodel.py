"""MIMO-OFDM signal synthesis: tapped-delay-line channels, pilot grid, observations.

Array index conventions used across the package:

* taps ``(M, N, L)``  -- receive antenna, transmit antenna, delay
* frequency response ``(M, N, K)``
* symbols ``(N, K, T)`` and observations ``(M, K, T)`` -- subcarrier k,
  OFDM symbol t; the channel is constant over the T symbols of a packet.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .coding import CodeSpec, Constellation, Interleaver, conv_encode, get_constellation, map_symbols


class BadDims(ValueError):
    pass


class CodeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["ConvRate1_2"] = "ConvRate1_2"
    generators: tuple[str, str] = ("7", "5")  # octal
    constraint_length: int = 3
    termination: Literal["zero-tail"] = "zero-tail"

    @field_validator("generators")
    @classmethod
    def _octal(cls, v):
        for g in v:
            if not g or any(ch not in "01234567" for ch in g) or int(g, 8) == 0:
                raise ValueError(f"generator {g!r} is not a nonzero octal string")
        return v

    def spec(self) -> CodeSpec:
        return CodeSpec(
            kind=self.kind,
            generators=tuple(int(g, 8) for g in self.generators),
            constraint_length=self.constraint_length,
            termination=self.termination,
        )


class SystemConfig(BaseModel):
    """Physical-layer configuration of one MIMO-OFDM packet."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_tx: int = 2
    n_rx: int = 2
    n_subcarriers: int = 64
    n_taps: int = 4
    n_ofdm_symbols: int = 4
    constellation: Literal["QPSK", "QAM16"] = "QPSK"
    code: CodeConfig = CodeConfig()
    # explicit (antenna, subcarrier, ofdm_symbol) triples; None selects the comb below
    pilot_grid: Optional[tuple[tuple[int, int, int], ...]] = None
    pilot_spacing: int = 2
    pilot_ofdm_symbols: tuple[int, ...] = (0, 4)
    snr_db: float = 8.0
    seed: int = 0
    power_delay_profile: Union[Literal["uniform", "exponential"], tuple[float, ...]] = "uniform"

    @model_validator(mode="after")
    def _check(self):
        for name in ("n_tx", "n_rx", "n_subcarriers", "n_taps", "n_ofdm_symbols", "pilot_spacing"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_taps > self.n_subcarriers:
            raise ValueError("n_taps must not exceed n_subcarriers")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if isinstance(self.power_delay_profile, tuple):
            pdp = np.asarray(self.power_delay_profile, dtype=float)
            if pdp.shape != (self.n_taps,) or np.any(pdp < 0) or abs(pdp.sum() - 1) > 1e-9:
                raise ValueError("power_delay_profile must have n_taps nonnegative entries summing to 1")
        if self.pilot_grid is not None:
            seen = set()
            for n, k, t in self.pilot_grid:
                if not (0 <= n < self.n_tx and 0 <= k < self.n_subcarriers and 0 <= t < self.n_ofdm_symbols):
                    raise ValueError(f"pilot ({n}, {k}, {t}) lies outside the resource grid")
                if (k, t) in seen:
                    raise ValueError(f"two antennas carry pilots on resource ({k}, {t})")
                seen.add((k, t))
        return self

    @property
    def noise_precision(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def pdp(self) -> np.ndarray:
        L = self.n_taps
        if self.power_delay_profile == "uniform":
            return np.full(L, 1.0 / L)
        if self.power_delay_profile == "exponential":
            p = np.exp(-np.arange(L, dtype=float))
            return p / p.sum()
        return np.asarray(self.power_delay_profile, dtype=float)

    def constellation_obj(self) -> Constellation:
        return get_constellation(self.constellation)

    def code_spec(self) -> CodeSpec:
        return self.code.spec()


@dataclass(frozen=True, eq=False)
class ChannelTaps:
    taps: np.ndarray  # (M, N, L)


@dataclass(frozen=True, eq=False)
class ObservationGrid:
    samples: np.ndarray  # (M, K, T)
    noise_precision: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("observation grid has non-finite entries")


@dataclass(frozen=True, eq=False)
class SymbolGrid:
    symbols: np.ndarray  # (N, K, T)
    is_pilot: np.ndarray  # (N, K, T) bool


@dataclass(frozen=True, eq=False)
class ResourceLayout:
    """Where pilots and data live on the (k, t) grid.

    At a pilot resource exactly one antenna sends its pilot and the others
    send a known zero, so the whole symbol vector there is known.
    """

    pilot_re: np.ndarray  # (K, T) bool
    pilot_symbols: np.ndarray  # (N, K, T), zero off the active antenna
    data_k: np.ndarray  # subcarrier index of each data resource
    data_t: np.ndarray
    bits_per_symbol: int
    code: CodeSpec

    @property
    def n_data(self) -> int:
        return self.data_k.size

    @property
    def n_coded(self) -> int:
        return self.n_data * self.bits_per_symbol

    @property
    def n_info(self) -> int:
        return self.n_coded // 2 - self.code.memory


def default_pilot_triples(cfg: SystemConfig):
    """Antenna-orthogonal comb: antenna n on subcarriers k = n mod (N * spacing)."""
    period = cfg.n_tx * cfg.pilot_spacing
    out = []
    for t in cfg.pilot_ofdm_symbols:
        if t >= cfg.n_ofdm_symbols:
            continue
        for k in range(cfg.n_subcarriers):
            n = k % period
            if n < cfg.n_tx:
                out.append((n, k, t))
    return out


def resource_layout(cfg: SystemConfig) -> ResourceLayout:
    N, K, T = cfg.n_tx, cfg.n_subcarriers, cfg.n_ofdm_symbols
    triples = cfg.pilot_grid if cfg.pilot_grid is not None else default_pilot_triples(cfg)
    const = cfg.constellation_obj()
    pilot_re = np.zeros((K, T), dtype=bool)
    pilots = np.zeros((N, K, T), dtype=complex)
    # pilot values are fixed by the system seed and known to the receiver
    rng = np.random.default_rng([cfg.seed, 0x70696C6F74])
    qpsk = get_constellation("QPSK").points
    for n, k, t in triples:
        pilot_re[k, t] = True
        pilots[n, k, t] = qpsk[rng.integers(4)]
    data_k, data_t = np.nonzero(~pilot_re)
    code = cfg.code_spec()
    layout = ResourceLayout(pilot_re, pilots, data_k, data_t, const.bits_per_symbol, code)
    if layout.n_info < 1:
        raise ValueError("resource grid leaves no room for information bits")
    if layout.n_coded % 2:
        raise ValueError("coded block length must be even for a rate-1/2 code")
    return layout


def make_interleavers(cfg: SystemConfig, layout: ResourceLayout) -> list[Interleaver]:
    return [Interleaver(layout.n_coded, np.random.SeedSequence([cfg.seed, 0x696C76, n])) for n in range(cfg.n_tx)]


# ---------------------------------------------------------------- channel


def dft_matrix(K: int, L: int) -> np.ndarray:
    if not 1 <= L <= K:
        raise BadDims(f"need 1 <= L <= K, got K={K}, L={L}")
    k = np.arange(K)[:, None]
    l = np.arange(L)[None, :]
    return np.exp(-2j * np.pi * k * l / K)


def freq_response(taps, D: np.ndarray) -> np.ndarray:
    """h~_mn(k) = sum_l h_mn(l) d_kl, shape (M, N, K)."""
    h = taps.taps if isinstance(taps, ChannelTaps) else np.asarray(taps)
    if h.shape[-1] != D.shape[1]:
        raise BadDims("tap count does not match the DFT matrix")
    return h @ D.T


def draw_channel(cfg: SystemConfig, rng: np.random.Generator) -> ChannelTaps:
    shape = (cfg.n_rx, cfg.n_tx, cfg.n_taps)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return ChannelTaps(z * np.sqrt(cfg.pdp))


def observe(
    x: SymbolGrid, taps: ChannelTaps, cfg: SystemConfig, rng: np.random.Generator, noiseless: bool = False
) -> ObservationGrid:
    """y_m(k,t) = sum_n x_n(k,t) h~_mn(k) + w_m(k,t), w ~ CN(0, 1/gamma)."""
    sym = x.symbols if isinstance(x, SymbolGrid) else np.asarray(x)
    D = dft_matrix(cfg.n_subcarriers, cfg.n_taps)
    H = freq_response(taps, D)
    if sym.shape != (cfg.n_tx, cfg.n_subcarriers, cfg.n_ofdm_symbols):
        raise BadDims(f"symbol grid shape {sym.shape} does not match the configuration")
    y = np.einsum("mnk,nkt->mkt", H, sym)
    gamma = cfg.noise_precision
    if not noiseless:
        shape = y.shape
        w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5 / gamma)
        y = y + w
    return ObservationGrid(y, gamma)


# ---------------------------------------------------------------- transmitter


@dataclass(frozen=True, eq=False)
class Packet:
    info_bits: np.ndarray  # (N, n_info)
    coded_bits: np.ndarray  # (N, n_coded), after interleaving
    symbols: SymbolGrid
    taps: ChannelTaps
    obs: ObservationGrid


def transmit(
    cfg: SystemConfig,
    layout: ResourceLayout,
    interleavers: list[Interleaver],
    rng: np.random.Generator,
    noiseless: bool = False,
    data: bool = True,
) -> Packet:
    """Draw bits, channel and noise for one packet and build the observations.

    With ``data=False`` the data resources carry zeros (pilot-only packet).
    """
    N = cfg.n_tx
    const = cfg.constellation_obj()
    info = rng.integers(0, 2, size=(N, layout.n_info), dtype=np.int8)
    coded = np.empty((N, layout.n_coded), dtype=np.int8)
    sym = layout.pilot_symbols.copy()
    for n in range(N):
        coded[n] = interleavers[n].interleave(conv_encode(info[n], layout.code))
        if data:
            sym[n, layout.data_k, layout.data_t] = map_symbols(coded[n], const)
    is_pilot = np.broadcast_to(layout.pilot_re, sym.shape).copy()
    grid = SymbolGrid(sym, is_pilot)
    taps = draw_channel(cfg, rng)
    obs = observe(grid, taps, cfg, rng, noiseless=noiseless)
    return Packet(info, coded, grid, taps, obs)
