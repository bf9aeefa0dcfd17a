import csv
import json

import pytest

from pinblock import netmodel
from pinblock.cli import main, resolve_seed
from pinblock.errors import ValidationError


def _summary(path):
    return json.loads((path / "summary.json").read_text())


@pytest.fixture
def fig2_edges(tmp_path):
    p = tmp_path / "fig2.txt"
    netmodel.write_edge_list(netmodel.fixture_fig2(), p)
    return p


def test_decompose_fig2_from_file(tmp_path, fig2_edges):
    out = tmp_path / "run"
    assert main(["decompose", "--edges", str(fig2_edges), "--pins", "1", "--out", str(out)]) == 0
    s = _summary(out)
    assert s["verdict"] == "MATCH"
    assert sorted(s["sbd"]["sizes"]) == [1, 1, 1, 2]
    assert s["hat_part_sizes"] == [2, 0, 0, 3]
    assert s["config"]["pins"] == [1]


def test_decompose_fig5_preset(tmp_path):
    assert main(["decompose", "--preset", "fig5", "--out", str(tmp_path)]) == 0
    assert _summary(tmp_path)["hat_part_sizes"] == [7, 1, 1, 1]


def test_decompose_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["decompose", "--preset", "fig5", "--seed", "3", "--out", str(d)])
    # the out path is part of the embedded config, so compare everything else
    sa, sb = _summary(a), _summary(b)
    sa["config"].pop("out"), sb["config"].pop("out")
    assert sa == sb


def test_missing_file_exit_2(tmp_path):
    assert main(["decompose", "--edges", str(tmp_path / "nope.txt"), "--pins", "1",
                 "--out", str(tmp_path)]) == 2


def test_empty_pins_exit_2(tmp_path, fig2_edges):
    assert main(["decompose", "--edges", str(fig2_edges), "--pins", "[]", "--out", str(tmp_path)]) == 2
    assert main(["decompose", "--edges", str(fig2_edges), "--out", str(tmp_path)]) == 2


def test_out_of_range_pin_exit_2(tmp_path, fig2_edges):
    assert main(["decompose", "--edges", str(fig2_edges), "--pins", "9", "--out", str(tmp_path)]) == 2


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("PINBLOCK_SEED", "17")
    assert resolve_seed(None) == 17
    assert resolve_seed(4) == 4
    monkeypatch.setenv("PINBLOCK_SEED", "x")
    with pytest.raises(ValidationError):
        resolve_seed(None)
    monkeypatch.delenv("PINBLOCK_SEED")
    assert resolve_seed(None) == 0


def test_msf_single_gamma_row(tmp_path):
    rc = main(["msf", "--preset", "fig2", "--blocks", "driven-only", "--gamma-min", "1.0",
               "--gamma-max", "1.0", "--t-span", "200", "--out", str(tmp_path)])
    assert rc == 0
    rows = list(csv.reader((tmp_path / "msf.csv").open()))
    assert rows[0] == ["gamma", "block_id", "mle"]
    assert len(rows) == 2


def test_msf_undriven_only_is_flat(tmp_path):
    rc = main(["msf", "--preset", "fig2", "--blocks", "undriven-only", "--gamma-min", "0",
               "--gamma-max", "2", "--gamma-step", "1", "--t-span", "200", "--out", str(tmp_path)])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "msf.csv").open()))
    by_block = {}
    for r in rows:
        by_block.setdefault(r["block_id"], set()).add(r["mle"])
    assert len(by_block) == 3
    assert all(len(v) == 1 for v in by_block.values())
    assert _summary(tmp_path)["gamma_star_2"] is None


def test_simulate_identical_and_uncontrolled(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--preset", "fig2", "--gamma", "1.5", "--identical", "--t-span", "20",
                 "--out", str(a)]) == 0
    assert _summary(a)["synchronized"] is True
    errors = [float(r["error"]) for r in csv.DictReader((a / "errors.csv").open())]
    assert max(errors) == 0.0
    assert main(["simulate", "--preset", "fig2", "--gamma", "0", "--t-span", "300", "--out", str(b)]) == 0
    assert _summary(b)["synchronized"] is False


def test_batch_zero_trials(tmp_path):
    assert main(["batch", "--trials", "0", "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path)
    assert s["trials"] == [] or s["n_trials"] == 0


def test_batch_small_all_match(tmp_path):
    assert main(["batch", "--trials", "4", "--pins-per-trial", "2", "--seed", "5", "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path)
    assert s["match_rate"] == 1.0


def test_batch_deterministic_across_jobs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["batch", "--trials", "3", "--jobs", "1", "--out", str(a)])
    main(["batch", "--trials", "3", "--jobs", "3", "--out", str(b)])
    sa, sb = _summary(a), _summary(b)
    for s in (sa, sb):
        s["config"].pop("out")
        s["config"].pop("extra", None)
    assert sa["trials"] == sb["trials"]
