import hashlib
import json
from pathlib import Path

import pytest
import torch

from dualpaint.cli import main
from dualpaint.config import RunConfig, apply_overrides, load_config, parse_config_text
from dualpaint.data import load_image, load_mask, save_image, save_mask, synth_dataset
from dualpaint.errors import ConfigError


def test_parse_config_text_and_types():
    cfg = parse_config_text(
        """
        # ablation toggles
        model.use_bigff = false
        model.use_cfa = true
        model.levels = 4
        train.lr_initial = 1e-3
        data.size = 32
        loss.style = 100
        """
    )
    assert cfg.model.use_bigff is False
    assert cfg.model.use_cfa is True
    assert cfg.model.levels == 4
    assert cfg.train.lr_initial == pytest.approx(1e-3)
    assert cfg.data.size == 32
    assert cfg.loss.style == pytest.approx(100.0)


def test_overrides_win_over_file_values(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("train.max_iters = 100\nmodel.use_cfa = true\n")
    cfg = load_config(path, ["train.max_iters=7", "model.use_cfa=false", "model.levels=4", "data.size=16"])
    assert cfg.train.max_iters == 7
    assert cfg.model.use_cfa is False


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("model.nonexistent = 1")
    with pytest.raises(ConfigError):
        parse_config_text("typo_section.levels = 4")
    cfg = RunConfig()
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["no_equals_sign"])
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["model.levels=notanumber"])


def test_ablation_keys_available():
    cfg = RunConfig()
    apply_overrides(
        cfg,
        [
            "model.use_bigff=false",
            "model.use_cfa=false",
            "model.multiscale_cfa=false",
            "model.two_stream=false",
            "model.cross_borrow=false",
        ],
    )
    assert not any(
        (cfg.model.use_bigff, cfg.model.use_cfa, cfg.model.multiscale_cfa, cfg.model.two_stream, cfg.model.cross_borrow)
    )


def test_invalid_phase_rejected():
    with pytest.raises(ConfigError):
        load_config(None, ["train.phase=warmup"])


def _dir_digest(path: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(path.rglob("*")):
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_cli_synth_data_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth-data", "--n", "8", "--size", "16", "--seed", "1", "--out-dir", str(a)]) == 0
    assert main(["synth-data", "--n", "8", "--size", "16", "--seed", "1", "--out-dir", str(b)]) == 0
    assert _dir_digest(a) == _dir_digest(b)
    assert (a / "manifest.txt").read_text().splitlines()[0] == "image_0000.png"


TINY_TRAIN_ARGS = [
    "--set", "data.n_samples=6",
    "--set", "data.size=32",
    "--set", "data.holdout=2",
    "--set", "model.levels=3",
    "--set", "model.base_channels=8",
    "--set", "model.feature_channels=8",
    "--set", "train.batch_size=2",
    "--set", "train.max_iters=5",
]


@pytest.fixture(scope="module")
def toy_checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--out-dir", str(out), *TINY_TRAIN_ARGS])
    assert code == 0
    return out / "checkpoint.pt"


def test_cli_train_writes_checkpoint_and_log(toy_checkpoint):
    assert toy_checkpoint.exists()
    log = toy_checkpoint.parent / "metrics.jsonl"
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(records) == 5
    assert {"iteration", "loss_joint", "loss_rec", "lr_g", "phase"} <= records[0].keys()


def test_cli_eval_ground_truth_fixture(tmp_path, capsys):
    code = main(
        [
            "eval", "--oracle-ground-truth", "--out-dir", str(tmp_path / "eval"),
            "--set", "data.n_samples=9", "--set", "data.size=16",
            "--set", "data.holdout=0", "--set", "model.levels=3",
        ]
    )
    assert code == 0
    table = capsys.readouterr().out
    assert "100.00" in table and "1.0000" in table
    reports = json.loads((tmp_path / "eval" / "metrics.json").read_text())
    assert all(r["psnr"] == 100.0 for r in reports)


def test_cli_infer_known_mask_is_identity(tmp_path, toy_checkpoint):
    sample = synth_dataset(1, 16, seed=2)[0]
    image_path = tmp_path / "input.png"
    save_image(sample.image_gt, image_path)
    mask_path = tmp_path / "mask.png"
    save_mask(torch.ones(1, 16, 16), mask_path)
    out_dir = tmp_path / "out"
    code = main(
        ["infer", "--image", str(image_path), "--mask", str(mask_path),
         "--checkpoint", str(toy_checkpoint), "--out-dir", str(out_dir)]
    )
    assert code == 0
    assert torch.equal(load_image(out_dir / "composite.png"), load_image(image_path))
    metadata = json.loads((out_dir / "metadata.json").read_text())
    assert metadata["mask_ratio_percent"] == 0.0


def test_cli_infer_deterministic_and_complete(tmp_path, toy_checkpoint):
    sample = synth_dataset(3, 16, seed=3)[2]
    image_path = tmp_path / "input.png"
    save_image(sample.image_gt, image_path)
    mask_path = tmp_path / "mask.png"
    save_mask(sample.mask, mask_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    for out in (out1, out2):
        code = main(
            ["infer", "--image", str(image_path), "--mask", str(mask_path),
             "--checkpoint", str(toy_checkpoint), "--out-dir", str(out)]
        )
        assert code == 0
    for name in ("composite.png", "output.png", "edges.png", "metadata.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    edge = load_mask(out1 / "edges.png")
    assert set(edge.unique().tolist()) <= {0.0, 1.0}
    comp = load_image(out1 / "composite.png")
    assert torch.equal(comp * sample.mask, load_image(image_path) * sample.mask)


def test_cli_exit_codes(tmp_path):
    # config error -> 2
    assert main(["train", "--out-dir", str(tmp_path / "x"), "--set", "bogus.key=1"]) == 2
    # missing checkpoint -> 3
    sample = synth_dataset(1, 16, seed=4)[0]
    image_path = tmp_path / "i.png"
    save_image(sample.image_gt, image_path)
    mask_path = tmp_path / "m.png"
    save_mask(sample.mask, mask_path)
    assert (
        main(
            ["infer", "--image", str(image_path), "--mask", str(mask_path),
             "--checkpoint", str(tmp_path / "none.pt"), "--out-dir", str(tmp_path / "o")]
        )
        == 3
    )


def test_cli_env_var_checkpoint_dir(tmp_path, toy_checkpoint, monkeypatch, capsys):
    monkeypatch.setenv("DUALPAINT_CHECKPOINT_DIR", str(toy_checkpoint.parent))
    sample = synth_dataset(1, 16, seed=5)[0]
    image_path = tmp_path / "i.png"
    save_image(sample.image_gt, image_path)
    mask_path = tmp_path / "m.png"
    save_mask(sample.mask, mask_path)
    code = main(["infer", "--image", str(image_path), "--mask", str(mask_path), "--out-dir", str(tmp_path / "o")])
    assert code == 0


def test_cli_train_max_iters_flag(tmp_path):
    out = tmp_path / "run"
    code = main(["train", "--out-dir", str(out), "--max-iters", "2", *TINY_TRAIN_ARGS])
    assert code == 0
    records = (out / "metrics.jsonl").read_text().splitlines()
    assert len(records) == 2  # flag wins over the --set value
