import json
import os
import subprocess

import numpy as np
import pytest

import demnet

MASK = (1 << 64) - 1


def splitmix_uniform(seed, count):
    out = []
    for i in range(count):
        z = (seed + (i + 1) * 0x9E3779B97F4A7C15) & MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        z ^= z >> 31
        out.append((z >> 11) * 2.0**-53)
    return out


def test_prng_matches_reference():
    assert list(demnet.prng_uniform(42, 8)) == splitmix_uniform(42, 8)
    assert demnet.prng_uniform(42, 8)[0] == 0.7415648787718233


def test_conv_against_numpy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 3, 6, 5)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    b = rng.standard_normal(4).astype(np.float32)
    got = demnet.conv2d(x, w, b)
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((2, 4, 6, 5))
    for i in range(6):
        for j in range(5):
            patch = xp[:, :, i:i + 3, j:j + 3]
            ref[:, :, i, j] = np.einsum("nchw,ochw->no", patch, w) + b
    assert got.shape == (2, 4, 6, 5)
    np.testing.assert_allclose(got, ref, atol=1e-4)


def test_pool_relu_softmax():
    x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
    assert demnet.maxpool(x).reshape(-1).tolist() == [5, 7, 13, 15]
    assert demnet.relu(np.array([-1.0, 2.0], dtype=np.float32)).tolist() == [0.0, 2.0]
    p = demnet.softmax(np.zeros((2, 4), dtype=np.float32))
    np.testing.assert_allclose(p, 0.25)


def test_model_roundtrip(tmp_path):
    m = demnet.Model(input="1,8,8", stem_filters=4, block_filters="4,8", dense_widths="8,8,8")
    assert m.parameter_count == 1640
    x = np.random.default_rng(1).random((3, 1, 8, 8), dtype=np.float32)
    probs = m.predict_proba(x)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-5)
    assert m.predict(x).tolist() == probs.argmax(axis=1).tolist()
    m.save(str(tmp_path / "m.dmnt"))
    back = demnet.Model.load(str(tmp_path / "m.dmnt"))
    assert np.array_equal(back.logits(x), m.logits(x))
    with pytest.raises(demnet.ShapeError):
        m.predict(np.zeros((1, 1, 9, 8), dtype=np.float32))


def test_fit_history():
    m = demnet.Model(input="1,8,8", stem_filters=4, block_filters="4,8", dense_widths="8,8,8")
    rng = np.random.default_rng(2)
    x = rng.random((16, 1, 8, 8), dtype=np.float32)
    y = np.arange(16) % 4
    hist = m.fit(x, y, x, y, epochs=2, batch_size=4)
    assert [h["epoch"] for h in hist] == [1, 2]


def test_smote_and_metrics():
    x = np.array([[0, 0], [1, 1], [5, 5], [6, 6], [7, 7], [8, 8]], dtype=np.float32)
    y = np.array([0, 0, 1, 1, 1, 1])
    y4 = np.array([0, 0, 1, 1, 2, 2, 3, 3])
    x4 = np.repeat(np.arange(8, dtype=np.float32)[:, None], 2, axis=1)
    xb, yb, wit = demnet.smote(x4[:7], y4[:7], k=1)
    assert np.bincount(yb).tolist() == [2, 2, 2, 2]
    assert len(wit) == 1
    xs, ys, w = demnet.smote(np.vstack([x, x4[6:8]]), np.concatenate([y, [2, 3]]), k=1)
    assert np.bincount(ys).tolist() == [4, 4, 4, 4]
    for row, base, nb, lam in w:
        assert 0.0 <= lam < 1.0
    m = demnet.metrics([0, 1, 2, 3], [0, 1, 2, 2])
    assert m["accuracy"] == 0.75
    assert m["classes"][3]["undefined"]


def test_splits_and_features(tmp_path):
    assert demnet.split_sizes(6400) == (5120, 640, 640)
    tr, va, te = demnet.split_indices(np.arange(100) % 4)
    assert sorted(np.concatenate([tr, va, te]).tolist()) == list(range(100))
    x = np.random.default_rng(3).random((5, 7), dtype=np.float32)
    y = np.array([0, 1, 2, 3, 0])
    demnet.write_features(str(tmp_path / "f.ftc"), x, y, list(demnet.CLASS_NAMES))
    x2, y2, names = demnet.read_features(str(tmp_path / "f.ftc"))
    assert np.array_equal(x, x2) and y2.tolist() == y.tolist()
    assert names == list(demnet.CLASS_NAMES)
    (tmp_path / "bad.ftc").write_bytes(b"NOPE")
    with pytest.raises(demnet.FormatError):
        demnet.read_features(str(tmp_path / "bad.ftc"))


def test_pipeline_run(tmp_path):
    rng = np.random.default_rng(4)
    y = np.repeat(np.arange(4), [20, 12, 10, 6])
    x = (y[:, None] + 0.3 * rng.standard_normal((len(y), 6))).astype(np.float32)
    demnet.write_features(str(tmp_path / "f.ftc"), x, y, list(demnet.CLASS_NAMES))
    ov = {
        "run.out": str(tmp_path / "out"),
        "data.features": str(tmp_path / "f.ftc"),
        "model.stem_filters": "4",
        "model.block_filters": "4",
        "model.dense_widths": "8,8,8",
        "model.adaptive": "true",
        "train.epochs": "2",
        "train.batch_size": "8",
    }
    for cmd in ("prepare", "balance", "train", "evaluate"):
        demnet.run(cmd, "", ov)
    doc = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert 0.0 <= doc["accuracy"] <= 1.0
    with pytest.raises(demnet.ConfigError):
        demnet.run("train", "", {"train.epcohs": "1"})


@pytest.mark.skipif("DEMNET_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_help():
    out = subprocess.run([os.environ["DEMNET_CLI"], "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "prepare" in out.stdout
