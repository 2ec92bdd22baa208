"""Monte Carlo campaigns over SNR and receiver variants.

Every packet realization (bits, channel, noise) is seeded from
``(seed, snr, packet)`` and shared by all variants, so variant comparisons
are paired. Receivers draw no random numbers, which makes each
(variant, snr, packet) result a pure function of the configuration; the
reduction runs in (variant, snr, packet) order regardless of how packets were
scheduled, so results do not depend on the worker count.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .receiver import ALL_VARIANTS, ReceiverVariant, run_receiver
from .sigmodel import SystemConfig, make_interleavers, resource_layout, transmit

log = logging.getLogger(__name__)

CSV_HEADER = ["variant", "snr_db", "iteration", "ber", "ber_ci95", "channel_mse", "packets", "elapsed_s"]
NUMERIC_ERRORS = (FloatingPointError, np.linalg.LinAlgError, ZeroDivisionError)


class CampaignError(RuntimeError):
    """A (variant, snr) cell ended with no successfully decoded packet."""


class CampaignConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    base: SystemConfig = SystemConfig()
    snr_grid: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    variants: tuple[ReceiverVariant, ...] = ALL_VARIANTS
    n_packets: int = 500
    n_iters: int = 10
    seed: int = 0
    output_dir: str = "results"
    # wall-clock timing makes results.csv differ between identical runs
    record_timing: bool = False
    ep_damping: float = 0.0

    @field_validator("snr_grid")
    @classmethod
    def _grid(cls, v):
        if not v:
            raise ValueError("snr_grid must not be empty")
        if len(set(v)) != len(v) or not all(np.isfinite(v)):
            raise ValueError("snr_grid entries must be finite and distinct")
        return v

    @field_validator("variants")
    @classmethod
    def _variants(cls, v):
        if not v:
            raise ValueError("variants must not be empty")
        if len(set(v)) != len(v):
            raise ValueError("variants must be distinct")
        return v

    @model_validator(mode="after")
    def _check(self):
        if self.n_packets < 1:
            raise ValueError("n_packets must be at least 1")
        if self.n_iters < 1:
            raise ValueError("n_iters must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 0 <= self.ep_damping < 1:
            raise ValueError("ep_damping must lie in [0, 1)")
        return self

    def system(self, snr_db: float) -> SystemConfig:
        return self.base.model_copy(update={"snr_db": float(snr_db), "seed": self.seed})

    @classmethod
    def from_file(cls, path) -> "CampaignConfig":
        with open(path) as fh:
            return cls.model_validate_json(fh.read())


@dataclass(frozen=True)
class ResultRow:
    variant: str
    snr_db: float
    iteration: int
    ber: float
    ber_ci95: float
    channel_mse: float
    packets: int
    elapsed_s: float


@dataclass
class ResultsTable:
    rows: list[ResultRow] = field(default_factory=list)
    failures: dict = field(default_factory=dict)  # (variant, snr) -> failed packet count
    config: CampaignConfig | None = None

    def select(self, variant=None, snr_db=None, iteration=None) -> list[ResultRow]:
        out = self.rows
        if variant is not None:
            out = [r for r in out if r.variant == str(variant)]
        if snr_db is not None:
            out = [r for r in out if r.snr_db == snr_db]
        if iteration is not None:
            out = [r for r in out if r.iteration == iteration]
        return out

    def final_iteration(self) -> int:
        return max(r.iteration for r in self.rows)


def ber_ci95(errors: int, n_bits: int) -> float:
    """Normal-approximation half-width; rule of three when no error was seen."""
    if n_bits <= 0:
        return float("nan")
    if errors == 0:
        return 3.0 / n_bits
    p = errors / n_bits
    return 1.96 * float(np.sqrt(p * (1 - p) / n_bits))


def snr_code(snr_db: float) -> int:
    # nonnegative integer key for SeedSequence; milli-dB resolution
    return int(round((snr_db + 1000.0) * 1000.0))


def packet_rng(seed: int, snr_db: float, packet: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, snr_code(snr_db), packet]))


@dataclass
class PacketOutcome:
    """Per-variant results of one packet (errors and MSE per iteration)."""

    errors: dict  # variant -> list[int] or None on failure
    mse: dict
    elapsed: dict
    n_bits: int
    failure: dict  # variant -> message


def simulate_packet(cfg: CampaignConfig, snr_db: float, packet: int) -> PacketOutcome:
    sys_cfg = cfg.system(snr_db)
    layout = resource_layout(sys_cfg)
    ils = make_interleavers(sys_cfg, layout)
    pkt = transmit(sys_cfg, layout, ils, packet_rng(cfg.seed, snr_db, packet))
    out = PacketOutcome({}, {}, {}, pkt.info_bits.size, {})
    for v in cfg.variants:
        t0 = time.perf_counter()
        try:
            tr = run_receiver(
                pkt.obs, pkt.symbols, sys_cfg, v, cfg.n_iters,
                true_taps=pkt.taps, true_bits=pkt.info_bits, interleavers=ils, ep_damping=cfg.ep_damping,
            )
        except NUMERIC_ERRORS as exc:
            out.errors[v] = out.mse[v] = None
            out.failure[v] = f"{type(exc).__name__}: {exc}"
        else:
            out.errors[v] = [rec.bit_errors for rec in tr.iterations]
            out.mse[v] = [rec.channel_mse for rec in tr.iterations]
        out.elapsed[v] = time.perf_counter() - t0
    return out


def _work(args):
    cfg, snr, p = args
    return snr, p, simulate_packet(cfg, snr, p)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("FGRX_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("thread count must be positive")
    return threads


def run_campaign(cfg: CampaignConfig, threads: int | None = None, progress=None) -> ResultsTable:
    """Simulate every (snr, packet) once and reduce per (variant, snr, iteration)."""
    threads = resolve_threads(threads)
    jobs = [(cfg, snr, p) for snr in cfg.snr_grid for p in range(cfg.n_packets)]
    outcomes = {}
    if threads == 1:
        for i, job in enumerate(jobs):
            snr, p, res = _work(job)
            outcomes[snr, p] = res
            if progress:
                progress(i + 1, len(jobs))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for i, (snr, p, res) in enumerate(pool.map(_work, jobs, chunksize=8)):
                outcomes[snr, p] = res
                if progress:
                    progress(i + 1, len(jobs))

    table = ResultsTable(config=cfg)
    for v in cfg.variants:
        for snr in cfg.snr_grid:
            errors = np.zeros(cfg.n_iters, dtype=np.int64)
            mse = np.zeros(cfg.n_iters)
            ok = bits = 0
            elapsed = 0.0
            for p in range(cfg.n_packets):
                res = outcomes[snr, p]
                elapsed += res.elapsed[v]
                if res.errors[v] is None:
                    log.warning("packet %d at %g dB failed for %s: %s", p, snr, v, res.failure[v])
                    continue
                ok += 1
                bits += res.n_bits
                errors += res.errors[v]
                mse += res.mse[v]
            failed = cfg.n_packets - ok
            if failed:
                table.failures[str(v), snr] = failed
            if ok == 0:
                raise CampaignError(f"every packet failed for {v} at {snr} dB")
            for i in range(cfg.n_iters):
                table.rows.append(
                    ResultRow(
                        variant=str(v),
                        snr_db=float(snr),
                        iteration=i + 1,
                        ber=float(errors[i] / bits),
                        ber_ci95=ber_ci95(int(errors[i]), bits),
                        channel_mse=float(mse[i] / ok),
                        packets=ok,
                        elapsed_s=float(elapsed) if cfg.record_timing else 0.0,
                    )
                )
    return table


# ---------------------------------------------------------------- persistence


def write_results(table: ResultsTable, out_dir) -> list[Path]:
    """results.csv and results.json under ``out_dir`` (created if needed)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "results.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in table.rows:
                w.writerow([getattr(r, k) for k in CSV_HEADER])
        json_path = out / "results.json"
        doc = {
            "config": table.config.model_dump(mode="json") if table.config is not None else None,
            "rows": [asdict(r) for r in table.rows],
            "failures": [
                {"variant": v, "snr_db": s, "packets": n} for (v, s), n in sorted(table.failures.items())
            ],
        }
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return [csv_path, json_path]


def read_results_csv(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected header in {path}: {rd.fieldnames}")
        return [
            ResultRow(
                variant=d["variant"],
                snr_db=float(d["snr_db"]),
                iteration=int(d["iteration"]),
                ber=float(d["ber"]),
                ber_ci95=float(d["ber_ci95"]),
                channel_mse=float(d["channel_mse"]),
                packets=int(d["packets"]),
                elapsed_s=float(d["elapsed_s"]),
            )
            for d in rd
        ]


def snr_at_ber(table: ResultsTable, variant, target: float, iteration: int | None = None) -> float | None:
    """SNR where the final-iteration BER curve first drops to ``target``.

    Interpolates log10(BER) linearly between neighbouring grid points; None
    when the curve never crosses ``target`` on the grid.
    """
    it = iteration or table.final_iteration()
    rows = sorted(table.select(variant=variant, iteration=it), key=lambda r: r.snr_db)
    for lo, hi in zip(rows, rows[1:]):
        if lo.ber >= target >= hi.ber:
            if hi.ber <= 0:
                # log scale undefined at zero: take the crossing at the upper point
                return hi.snr_db if lo.ber > target else lo.snr_db
            a, b = np.log10(lo.ber), np.log10(hi.ber)
            if a == b:
                return lo.snr_db
            return float(lo.snr_db + (a - np.log10(target)) / (a - b) * (hi.snr_db - lo.snr_db))
    return None
