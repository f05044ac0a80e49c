import json
import math

import numpy as np
import pytest

import vise


def test_straight_chain_stacks_lengths():
    frames = vise.fk_chain([(0.0, 0.0, 110.0), (0.0, 0.0, 110.0), (0.0, 0.0, 115.0)])
    assert len(frames) == 3
    np.testing.assert_allclose(frames[-1][:3, 3], [0.0, 0.0, 335.0], atol=1e-12)
    np.testing.assert_allclose(frames[-1][:3, :3], np.eye(3), atol=1e-12)


def test_quarter_circle_tip():
    length = 220.0
    kappa = math.pi / (2 * length)
    r = 1.0 / kappa
    tip = vise.fk_chain([(kappa, 0.0, length)])[0][:3, 3]
    np.testing.assert_allclose(tip, [r, 0.0, r], atol=1e-9)


def test_key_points_end_at_tip():
    sections = [(0.004, 0.3, 110.0), (0.006, 2.0, 110.0), (0.002, 4.0, 115.0)]
    pts = vise.key_points(sections, 3)
    assert pts.shape == (3, 3)
    np.testing.assert_allclose(pts[-1], vise.fk_chain(sections)[-1][:3, 3], atol=1e-9)


def test_render_and_preprocess_give_binary_silhouette():
    cfg = vise.desk_config(3)
    sections = [(0.004, 0.3, 110.0), (0.006, 2.0, 110.0), (0.002, 4.0, 115.0)]
    raw = vise.render_view(cfg["scene"], 0, sections)
    assert raw.dtype == np.uint8 and raw.shape == (128, 128)
    binary = vise.preprocess(raw, cfg["preprocess"], 0)
    assert binary.shape == (64, 64)
    assert set(np.unique(binary)) <= {0, 255}
    assert (binary == 255).sum() > 0


def test_lr_schedule_halves_every_200_epochs():
    train = vise.desk_config()["train"]
    train.update(lr=1e-4, lr_decay=0.5, lr_decay_every=200)
    assert vise.lr_at(train, 0) == 1e-4
    assert vise.lr_at(train, 199) == 1e-4
    assert vise.lr_at(train, 200) == 5e-5
    assert vise.lr_at(train, 400) == 2.5e-5


def test_cli_round_trip(tmp_path):
    cfg = vise.desk_config(5)
    cfg["network"].update(conv_channels=[4], fc_hidden=8, dropout_p=0.0)
    cfg["train"].update(batch_size=2, max_epochs=2, early_stop_patience=None)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    code, out, err = vise.run_cli(["gen", "--config", str(path), "--out", str(tmp_path / "d"), "--count", "3"])
    assert code == 0, err
    code, out, err = vise.run_cli(
        ["train", "--config", str(path), "--data", str(tmp_path / "d"), "--out", str(tmp_path / "w.bin"), "--val",
         str(tmp_path / "d")])
    assert code == 0, err

    model = vise.Model(str(tmp_path / "w.bin"))
    assert model.representation == "points"
    assert model.scale == pytest.approx(335.0)
    stem = tmp_path / "d" / "raw" / "000000_"
    from PIL import Image
    views = [np.asarray(Image.open(f"{stem}{c}.pgm")) for c in (0, 1)]
    values = model.predict(*views)
    code, out, _ = vise.run_cli(["infer", "--weights", str(tmp_path / "w.bin"), f"{stem}0.pgm", f"{stem}1.pgm"])
    assert code == 0
    np.testing.assert_allclose(values, json.loads(out)["values"], rtol=1e-6)


def test_missing_weights_raise():
    with pytest.raises(vise.WeightFileError):
        vise.Model("/nonexistent/w.bin")
    code, _, err = vise.run_cli(["infer", "--weights", "/nonexistent/w.bin", "a.pgm", "b.pgm"])
    assert code == 4
    assert json.loads(err)["error"]["type"] == "io"
