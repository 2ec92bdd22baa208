import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from pydantic import ValidationError

from fgrx.harness import (
    CSV_HEADER,
    CampaignConfig,
    ResultRow,
    ResultsTable,
    ber_ci95,
    packet_rng,
    read_results_csv,
    resolve_threads,
    run_campaign,
    snr_at_ber,
    write_results,
)
from fgrx.plots import emit_plots
from fgrx.receiver import ReceiverVariant as V
from fgrx.sigmodel import SystemConfig

SMALL = CampaignConfig(snr_grid=(3.0, 6.0), n_packets=3, n_iters=2, seed=5)


def test_ci95_rules():
    assert ber_ci95(0, 1000) == 3 / 1000
    assert np.isclose(ber_ci95(10, 1000), 1.96 * np.sqrt(0.01 * 0.99 / 1000))
    assert np.isnan(ber_ci95(0, 0))


@pytest.mark.parametrize(
    "kwargs",
    [dict(snr_grid=()), dict(snr_grid=(1.0, 1.0)), dict(n_packets=0), dict(n_iters=0), dict(variants=()),
     dict(variants=("BpMfExact", "BpMfExact")), dict(variants=("Nope",)), dict(seed=2**64), dict(bogus=1),
     dict(ep_damping=1.0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        CampaignConfig(**kwargs)


def test_config_from_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"base": {"snr_db": 3.0}, "snr_grid": [2, 4], "variants": ["BpMfEp"], "n_packets": 7}))
    cfg = CampaignConfig.from_file(p)
    assert cfg.snr_grid == (2.0, 4.0) and cfg.variants == (V.BP_MF_EP,) and cfg.n_packets == 7
    assert cfg.system(4.0).snr_db == 4.0 and cfg.system(4.0).seed == cfg.seed
    p.write_text(json.dumps({"base": {"n_tx": 2, "typo": 1}}))
    with pytest.raises(ValidationError):
        CampaignConfig.from_file(p)


def test_packet_seeds_are_paired_and_distinct():
    a = packet_rng(1, 5.0, 3).integers(1 << 62, size=4)
    assert np.array_equal(a, packet_rng(1, 5.0, 3).integers(1 << 62, size=4))
    for other in (packet_rng(2, 5.0, 3), packet_rng(1, 5.5, 3), packet_rng(1, 5.0, 4)):
        assert not np.array_equal(a, other.integers(1 << 62, size=4))


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("FGRX_THREADS", raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv("FGRX_THREADS", "3")
    assert resolve_threads() == 3 and resolve_threads(2) == 2
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_campaign_table_shape_and_determinism():
    t1 = run_campaign(SMALL)
    t2 = run_campaign(SMALL)
    assert t1.rows == t2.rows
    assert len(t1.rows) == 5 * 2 * 2
    keys = {(r.variant, r.snr_db, r.iteration) for r in t1.rows}
    assert len(keys) == len(t1.rows)
    for r in t1.rows:
        assert 0 <= r.ber <= 1 and r.channel_mse >= 0 and r.packets == 3 and r.elapsed_s == 0.0


def test_campaign_is_independent_of_worker_count():
    assert run_campaign(SMALL, threads=2).rows == run_campaign(SMALL, threads=1).rows


def test_single_noiseless_jmap_packet_has_zero_ber():
    cfg = CampaignConfig(snr_grid=(200.0,), variants=(V.KNOWN_CHANNEL_JMAP,), n_packets=1, n_iters=1)
    (row,) = run_campaign(cfg).rows
    assert row.ber == 0.0 and row.channel_mse == 0.0 and row.ber_ci95 == 3 / 444


def test_ep_close_to_exact_at_10db():
    cfg = CampaignConfig(snr_grid=(10.0,), variants=(V.BP_MF_EXACT, V.BP_MF_EP), n_packets=200, seed=1)
    t = run_campaign(cfg, threads=2)
    ex, ep = (t.select(variant=v, iteration=10)[0].ber for v in (V.BP_MF_EXACT, V.BP_MF_EP))
    assert ep <= 2 * ex


def test_empty_table_writes_header_only(tmp_path):
    csv_path, json_path = write_results(ResultsTable(), tmp_path)
    assert csv_path.read_text() == ",".join(CSV_HEADER) + "\n"
    assert json.loads(json_path.read_text())["rows"] == []


def test_one_row_round_trip(tmp_path):
    row = ResultRow("BpMfEp", 4.5, 3, 0.0123, 0.0004, 0.00213, 17, 0.0)
    table = ResultsTable([row], config=SMALL)
    csv_path, json_path = write_results(table, tmp_path / "nested")
    assert read_results_csv(csv_path) == [row]
    with open(csv_path, newline="") as fh:
        assert next(csv.reader(fh)) == CSV_HEADER
    doc = json.loads(json_path.read_text())
    assert doc["rows"][0]["ber"] == 0.0123 and doc["config"]["seed"] == 5


def test_write_errors_carry_the_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match=str(blocker)):
        write_results(ResultsTable(), blocker / "sub")


def _table(bers, variant="BpMfExact"):
    return ResultsTable([ResultRow(variant, s, 1, b, 0, 0, 1, 0) for s, b in bers])


def test_snr_at_ber_interpolates_in_log_domain():
    t = _table([(1.0, 1e-1), (2.0, 1e-3), (3.0, 1e-4)])
    assert np.isclose(snr_at_ber(t, "BpMfExact", 1e-2), 1.5)
    assert snr_at_ber(t, "BpMfExact", 1e-6) is None
    assert snr_at_ber(_table([(1.0, 1e-3), (2.0, 1e-4)]), "BpMfExact", 1e-2) is None
    assert snr_at_ber(_table([(1.0, 1e-1), (2.0, 0.0)]), "BpMfExact", 1e-2) == 2.0


def test_svg_plots_are_well_formed(tmp_path):
    table = run_campaign(SMALL)
    paths = emit_plots(table, tmp_path)
    assert sorted(p.name for p in paths) == ["ber_vs_iter.svg", "ber_vs_snr.svg", "mse_vs_iter.svg", "mse_vs_snr.svg"]
    for p in paths:
        root = ET.parse(p).getroot()
        lines = root.findall(".//{http://www.w3.org/2000/svg}polyline")
        assert len(lines) == len(SMALL.variants)


def test_base_config_is_respected():
    cfg = CampaignConfig(base=SystemConfig(n_ofdm_symbols=2), snr_grid=(5.0,), n_packets=1, n_iters=1)
    (row, *_) = run_campaign(cfg).rows
    assert row.packets == 1
