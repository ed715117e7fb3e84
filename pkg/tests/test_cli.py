import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from splitvae import create_cli

SMALL_CONFIG = {
    "epochs": 3,
    "batch_size": 8,
    "seed": 3,
    "gen_seed": 4,
    "latent_dim": 2,
    "embed_dim": 3,
    "silos": "uniform:2",
    "edge_hidden": [6],
    "server_hidden": [8],
    "runs": 2,
    "synth_nodes": 2,
    "synth_steps": 4,
    "synth_samples": 60,
}


@pytest.fixture
def cli():
    return create_cli()


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL_CONFIG))
    return path


@pytest.fixture
def trained_run(cli, runner, config_file, tmp_path):
    run_dir = tmp_path / "run"
    result = runner.invoke(cli, ["train", "--config", str(config_file), "--out-dir", str(run_dir)])
    assert result.exit_code == 0, result.output
    return run_dir


def _write(path, data, names=None):
    names = names or [f"c{i}" for i in range(data.shape[1])]
    pd.DataFrame(data, columns=names).to_csv(path, index=False)
    return path


def test_train_writes_manifest_losses_and_checkpoints(trained_run):
    manifest = json.loads((trained_run / "run.json").read_text())
    assert manifest["epochs_completed"] == 3
    assert [s["width"] for s in manifest["silos"]] == [4, 4]
    assert manifest["ledger"]["reduction_factor"] > 0
    losses = pd.read_csv(trained_run / "losses.csv")
    assert list(losses.columns) == ["epoch", "bc_loss", "kl_loss", "total"]
    assert len(losses) == 3
    for name in ("rank1.ckpt", "rank2.ckpt", "server.ckpt", "ledger.csv", "edge_losses.csv"):
        assert (trained_run / name).exists()


def test_train_with_zero_epochs(cli, runner, config_file, tmp_path):
    run_dir = tmp_path / "zero"
    result = runner.invoke(
        cli, ["train", "--config", str(config_file), "--epochs", "0", "--lockstep", "--out-dir", str(run_dir)]
    )
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(run_dir / "losses.csv")) == 0
    assert json.loads((run_dir / "run.json").read_text())["ledger"]["reduction_factor"] is None


def test_train_missing_data_file(cli, runner, tmp_path):
    result = runner.invoke(cli, ["train", "--data", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path / "x")])
    assert result.exit_code == 2
    assert "--data" in result.output


def test_train_rejects_bad_silo_spec(cli, runner, config_file, tmp_path):
    result = runner.invoke(
        cli, ["train", "--config", str(config_file), "--silos", "3,3", "--out-dir", str(tmp_path / "x")]
    )
    assert result.exit_code == 2


def test_train_from_csv_with_series_length(cli, runner, config_file, tmp_path):
    data = np.random.default_rng(0).uniform(size=(40, 6))
    csv = _write(tmp_path / "d.csv", data)
    result = runner.invoke(
        cli,
        ["train", "--config", str(config_file), "--data", str(csv), "--series-length", "3",
         "--silos", "2,4", "--embed-dim", "2,3", "--out-dir", str(tmp_path / "csvrun")],
    )
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "csvrun" / "run.json").read_text())
    assert manifest["layout"] == [2, 3]
    assert [s["embed_dim"] for s in manifest["silos"]] == [2, 3]
    assert manifest["silos"][0]["feature_names"] == ["c0", "c1"]


def test_generate_writes_one_file_per_edge(cli, runner, trained_run):
    result = runner.invoke(cli, ["generate", str(trained_run), "--count", "5"])
    assert result.exit_code == 0, result.output
    first = pd.read_csv(trained_run / "scenarios_rank1.csv")
    second = pd.read_csv(trained_run / "scenarios_rank2.csv")
    assert first.shape == (5, 4) and second.shape == (5, 4)
    assert list(first.columns) == ["n0_t0", "n0_t1", "n0_t2", "n0_t3"]


def test_generate_zero_count_writes_header_only(cli, runner, trained_run):
    result = runner.invoke(cli, ["generate", str(trained_run / "run.json"), "--count", "0"])
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(trained_run / "scenarios_rank1.csv")) == 0


def test_generate_is_deterministic(cli, runner, trained_run, tmp_path):
    for name in ("a", "b"):
        result = runner.invoke(cli, ["generate", str(trained_run), "--count", "7", "--out-dir", str(tmp_path / name)])
        assert result.exit_code == 0, result.output
    for rank in (1, 2):
        a = (tmp_path / "a" / f"scenarios_rank{rank}.csv").read_bytes()
        b = (tmp_path / "b" / f"scenarios_rank{rank}.csv").read_bytes()
        assert a == b


def test_generate_negative_count_and_missing_run(cli, runner, trained_run, tmp_path):
    assert runner.invoke(cli, ["generate", str(trained_run), "--count", "-1"]).exit_code == 2
    assert runner.invoke(cli, ["generate", str(tmp_path / "missing")]).exit_code == 2


def test_evaluate_identical_files(cli, runner, tmp_path):
    csv = _write(tmp_path / "obs.csv", np.random.default_rng(1).uniform(size=(20, 3)))
    out = tmp_path / "eval"
    result = runner.invoke(cli, ["evaluate", "--observed", str(csv), "--generated", str(csv), "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    metrics = pd.read_csv(out / "metrics.csv").set_index("metric")
    assert metrics.loc["fid", "mean"] == pytest.approx(0.0, abs=1e-8)
    assert metrics.loc["rmse", "mean"] == 0.0
    assert (metrics["std"] == 0.0).all()
    assert (metrics["method"] == "generated").all()


def test_evaluate_width_mismatch(cli, runner, tmp_path):
    obs = _write(tmp_path / "obs.csv", np.zeros((5, 3)))
    gen = _write(tmp_path / "gen.csv", np.zeros((5, 2)))
    result = runner.invoke(cli, ["evaluate", "--observed", str(obs), "--generated", str(gen), "--out-dir", str(tmp_path)])
    assert result.exit_code == 2


def test_evaluate_needs_exactly_one_source(cli, runner, tmp_path):
    obs = _write(tmp_path / "obs.csv", np.zeros((5, 3)))
    result = runner.invoke(cli, ["evaluate", "--observed", str(obs)])
    assert result.exit_code == 2


def test_evaluate_rejects_runs_for_static_files(cli, runner, tmp_path):
    csv = _write(tmp_path / "obs.csv", np.random.default_rng(1).uniform(size=(20, 3)))
    result = runner.invoke(
        cli, ["evaluate", "--observed", str(csv), "--generated", str(csv), "--runs", "5", "--out-dir", str(tmp_path)]
    )
    assert result.exit_code == 2
    assert "--runs" in result.output
    assert not (tmp_path / "metrics.csv").exists()


def test_evaluate_against_trained_run(cli, runner, trained_run, tmp_path):
    obs = _write(tmp_path / "obs.csv", np.random.default_rng(2).uniform(1.0, 3.0, size=(15, 8)))
    out = tmp_path / "eval"
    result = runner.invoke(
        cli, ["evaluate", "--observed", str(obs), "--manifest", str(trained_run), "--runs", "3", "--out-dir", str(out)]
    )
    assert result.exit_code == 0, result.output
    metrics = pd.read_csv(out / "metrics.csv")
    assert (metrics["runs"] == 3).all()
    assert (metrics["method"] == "splitvae").all()


def test_payload_report_with_analytic_widths(cli, runner, trained_run, tmp_path):
    out = tmp_path / "payload"
    result = runner.invoke(cli, ["payload-report", str(trained_run), "--embed-dims", "8,16,20", "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    report = pd.read_csv(out / "payload_report.csv")
    assert report["source"].tolist() == ["measured", "analytic", "analytic", "analytic"]
    factors = report.loc[report["source"] == "analytic", "reduction_factor"].tolist()
    assert factors[0] > factors[1] > factors[2]
    manifest = json.loads((trained_run / "run.json").read_text())
    assert report.loc[0, "epoch_bytes"] == manifest["ledger"]["epoch_bytes"]


def test_payload_report_on_untrained_run(cli, runner, config_file, tmp_path):
    run_dir = tmp_path / "zero"
    runner.invoke(cli, ["train", "--config", str(config_file), "--epochs", "0", "--out-dir", str(run_dir)])
    result = runner.invoke(cli, ["payload-report", str(run_dir), "--out-dir", str(tmp_path)])
    assert result.exit_code == 3


def test_compare_is_reproducible(cli, runner, config_file, tmp_path):
    for name in ("a", "b"):
        result = runner.invoke(cli, ["compare", "--config", str(config_file), "--out-dir", str(tmp_path / name)])
        assert result.exit_code == 0, result.output
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "b" / "metrics.csv").read_bytes()
    metrics = pd.read_csv(tmp_path / "a" / "metrics.csv")
    assert sorted(metrics["method"].unique()) == ["central_vae", "copula", "splitvae"]
    for method in ("splitvae", "central_vae", "copula", "observed"):
        assert (tmp_path / "a" / f"centroid_{method}.csv").exists()
        assert len(pd.read_csv(tmp_path / "a" / f"autocorr_{method}.csv")) == 4
    assert (tmp_path / "a" / "copula.npz").exists()


def test_sweep_writes_both_studies(cli, runner, config_file, tmp_path):
    out = tmp_path / "sweep"
    result = runner.invoke(
        cli,
        ["sweep", "--config", str(config_file), "--latent-dims", "2,3", "--decompositions", "uniform:2;3,5",
         "--out-dir", str(out)],
    )
    assert result.exit_code == 0, result.output
    sweep = pd.read_csv(out / "sweep_metrics.csv")
    assert len(sweep) == 2 * 4
    losses = pd.read_csv(out / "decomposition_losses.csv")
    assert sorted(losses["decomposition"].unique()) == ["3,5", "uniform:2"]
    assert len(losses) == 2 * SMALL_CONFIG["epochs"]


def test_sweep_needs_an_axis(cli, runner, config_file):
    assert runner.invoke(cli, ["sweep", "--config", str(config_file)]).exit_code == 2
