import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from sabce.cli import main
from sabce.config import DEFAULTS, from_mapping, load_config
from sabce.data import make_synthetic, write_csv
from sabce.errors import ConfigError

SMALL = dict(DEFAULTS, topology="d->6->d", epochs=8, pretrain_epochs=2, spl_warmup_epochs=2,
             learning_rate=0.01, classifier_hidden_grid=[4], classifier_epochs=30)


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    ds, _ = make_synthetic(20, 8, [0, 1], 3.0, 1.0, seed=5)
    write_csv(ds, d / "toy.csv")
    (d / "cfg.yaml").write_text(yaml.safe_dump(SMALL))
    return d


def run(data_csv, out, *extra):
    return main([extra[0], "--data", str(data_csv / "toy.csv"), "--config",
                 str(data_csv / "cfg.yaml"), "--out-dir", str(out), *extra[1:]])


def test_train_writes_artifacts(data_csv, tmp_path):
    assert run(data_csv, tmp_path, "train", "--seed", "3") == 0
    for name in ("checkpoint.npz", "loss_history.csv", "ranking.csv", "sparsity_curve.csv",
                 "resolved_config.yaml", "manifest.json"):
        assert (tmp_path / name).exists(), name
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 3 and man["command"] == "train"
    assert len((tmp_path / "loss_history.csv").read_text().splitlines()) == 13


def test_train_twice_byte_identical(data_csv, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(data_csv, a, "train", "--seed", "1") == 0
    assert run(data_csv, b, "train", "--seed", "1") == 0
    for name in ("ranking.csv", "loss_history.csv", "sparsity_curve.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_resolved_config_reruns(data_csv, tmp_path):
    run(data_csv, tmp_path / "a", "train", "--seed", "2")
    main(["train", "--data", str(data_csv / "toy.csv"), "--config",
          str(tmp_path / "a" / "resolved_config.yaml"), "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "ranking.csv").read_bytes() == \
        (tmp_path / "b" / "ranking.csv").read_bytes()


def test_resume_from_checkpoint(data_csv, tmp_path):
    cfg = dict(SMALL, checkpoint_every=4)
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg))
    common = ["--data", str(data_csv / "toy.csv"), "--config", str(tmp_path / "c.yaml")]
    assert main(["train", *common, "--out-dir", str(tmp_path / "full")]) == 0
    ck = tmp_path / "full" / "checkpoints" / "epoch_000008.npz"
    assert main(["train", *common, "--out-dir", str(tmp_path / "res"), "--resume", str(ck)]) == 0
    assert (tmp_path / "full" / "ranking.csv").read_bytes() == \
        (tmp_path / "res" / "ranking.csv").read_bytes()


def test_select_from_checkpoint(data_csv, tmp_path):
    run(data_csv, tmp_path, "train")
    assert main(["select", "--checkpoint", str(tmp_path / "checkpoint.npz"),
                 "--out-dir", str(tmp_path / "sel"), "--normalize-elbow"]) == 0
    info = json.loads((tmp_path / "sel" / "elbow.json").read_text())
    assert info["normalized_axes"] and info["n_features"] == 8


def test_missing_config_key_exit_1(data_csv, tmp_path, capsys):
    broken = {k: v for k, v in SMALL.items() if k != "mu2"}
    (tmp_path / "bad.yaml").write_text(yaml.safe_dump(broken))
    code = main(["train", "--data", str(data_csv / "toy.csv"), "--config",
                 str(tmp_path / "bad.yaml"), "--out-dir", str(tmp_path)])
    assert code == 1 and "missing config key: mu2" in capsys.readouterr().err


def test_unknown_flag_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["train", "--bogus"])
    assert info.value.code == 1


def test_bad_data_exit_2(tmp_path):
    (tmp_path / "bad.csv").write_text("a,label\n1,x\nq,y\n")
    assert main(["train", "--data", str(tmp_path / "bad.csv"), "--out-dir", str(tmp_path)]) == 2


def test_divergence_exit_3(tmp_path):
    (tmp_path / "huge.csv").write_text("a,b,label\n1e300,1,x\n-1e300,2,y\n1e300,3,x\n0,4,y\n")
    cfg = dict(SMALL, preprocess="none")
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg))
    with np.errstate(all="ignore"):
        code = main(["train", "--data", str(tmp_path / "huge.csv"), "--config",
                     str(tmp_path / "c.yaml"), "--out-dir", str(tmp_path)])
    assert code == 3


def test_sweep_lambda_curves(data_csv, tmp_path):
    assert run(data_csv, tmp_path, "sweep", "--lambda1-list", "0.0001", "0.001", "0.01") == 0
    assert len(list(tmp_path.glob("sparsity_lambda1_*.csv"))) == 3
    assert len((tmp_path / "lambda_sweep_summary.csv").read_text().splitlines()) == 4


def test_sweep_mu_grid(data_csv, tmp_path):
    assert run(data_csv, tmp_path, "sweep", "--grid-mu1", "0.2", "0.6", "--grid-mu2", "0.1",
               "--bottleneck-hidden", "4") == 0
    assert len((tmp_path / "mu_heatmap.csv").read_text().splitlines()) == 3


def test_sweep_without_grid_exit_1(data_csv, tmp_path):
    assert run(data_csv, tmp_path, "sweep") == 1


def test_stability_needs_two_runs(data_csv, tmp_path):
    assert run(data_csv, tmp_path, "stability", "--runs", "1") == 1
    assert run(data_csv, tmp_path, "stability", "--runs", "2", "--same-seed") == 0
    assert json.loads((tmp_path / "stability.json").read_text())["jaccard"] == 1.0


def test_evaluate_exp2(data_csv, tmp_path):
    assert run(data_csv, tmp_path, "evaluate", "--protocol", "exp2", "--k", "3",
               "--repeats", "2") == 0
    rows = (tmp_path / "report_exp2.csv").read_text().splitlines()
    assert rows[1].startswith("exp2,3,2,")


def test_evaluate_curve(data_csv, tmp_path):
    assert run(data_csv, tmp_path, "evaluate", "--protocol", "curve", "--k", "2", "4") == 0
    assert len((tmp_path / "accuracy_vs_k.csv").read_text().splitlines()) == 3


def test_out_dir_from_environment(data_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("SABCE_OUT_DIR", str(tmp_path / "env"))
    assert main(["train", "--data", str(data_csv / "toy.csv"), "--config",
                 str(data_csv / "cfg.yaml")]) == 0
    assert (tmp_path / "env" / "ranking.csv").exists()


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="unknown config keys"):
        from_mapping(dict(SMALL, colour="red"))
    with pytest.raises(ConfigError):
        from_mapping(dict(SMALL, activation="relu"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    cfg = from_mapping(SMALL)
    assert cfg.train.phase_epochs == (2, 2, 8) and cfg.train.hidden == (6,)


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "sabce.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("sabce ")
