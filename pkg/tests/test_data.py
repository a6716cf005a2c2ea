import gzip
import os
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import DATA
from icnet.data import (ADULT_COLUMNS, Dataset, download, load_mnist_idx, load_uci_csv, make_xor,
                        read_idx, split, standardize, stratified_indices)
from icnet.errors import ConfigError, ContractError, FormatError, LabelError, VocabularyError


def test_xor_points():
    d = make_xor()
    pairs = {tuple(x): y for x, y in zip(d.x_train.astype(int).tolist(), d.y_train)}
    assert pairs == {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 0}
    assert len(d.y_train) == len(d.y_test) == 4
    assert np.array_equal(d.x_train, d.x_test)


def test_dataset_is_immutable():
    d = make_xor()
    with pytest.raises(ValueError):
        d.x_train[0, 0] = 5.0
    with pytest.raises(LabelError):
        Dataset("bad", np.zeros((2, 1)), [0, 2], np.zeros((1, 1)), [0], 2)


def write_idx(path, magic, dims, payload, gz=False):
    raw = struct.pack(">I", magic) + struct.pack(f">{len(dims)}I", *dims) + bytes(payload)
    if gz:
        raw = gzip.compress(raw)
    with open(path, "wb") as fh:
        fh.write(raw)


def tiny_mnist(root, n=5, gz=False):
    ext = ".gz" if gz else ""
    pix = np.arange(n * 784) % 256
    pix[0] = 255
    for split_, count in (("train", n), ("t10k", 3)):
        write_idx(os.path.join(root, f"{split_}-images-idx3-ubyte{ext}"), 0x803, (count, 28, 28),
                  pix[:count * 784].astype(np.uint8), gz)
        write_idx(os.path.join(root, f"{split_}-labels-idx1-ubyte{ext}"), 0x801, (count,),
                  (np.arange(count) % 10).astype(np.uint8), gz)


@pytest.mark.parametrize("gz", [False, True])
def test_idx_round_trip(tmp_path, gz):
    tiny_mnist(tmp_path, gz=gz)
    d = load_mnist_idx(str(tmp_path))
    assert d.x_train.shape == (5, 1, 28, 28) and d.x_test.shape == (3, 1, 28, 28)
    assert d.x_train[0, 0, 0, 0] == 1.0 and d.x_train.max() <= 1.0
    assert d.x_train[0, 0, 0, 1] == pytest.approx(1 / 255)
    assert load_mnist_idx(str(tmp_path), subset=2, flatten=True).x_train.shape == (2, 784)


def test_idx_bad_magic_and_truncation(tmp_path):
    p = tmp_path / "f"
    write_idx(p, 0x801, (3,), [1, 2, 3])
    with pytest.raises(FormatError, match="byte 0"):
        read_idx(p, 0x803)
    write_idx(p, 0x803, (2, 28, 28), np.zeros(100, np.uint8))
    with pytest.raises(FormatError, match="truncated payload at byte 116"):
        read_idx(p, 0x803)
    p.write_bytes(b"\x00\x00\x08")
    with pytest.raises(FormatError, match="byte 3"):
        read_idx(p, 0x803)


def test_vendored_mnist_counts():
    d = load_mnist_idx(os.path.join(DATA, "mnist"))
    assert len(d.y_train) == 10000 and len(d.y_test) == 10000
    assert set(np.unique(d.y_train)) == set(range(10))
    assert d.x_train.min() == 0.0 and d.x_train.max() == 1.0


def test_yeast_split_counts():
    d = load_uci_csv("yeast", os.path.join(DATA, "yeast"))
    assert (len(d.y_train), len(d.y_test)) == (1038, 446)
    assert d.x_train.shape[1] == 8 and d.n_classes == 10
    total = np.bincount(np.concatenate([d.y_train, d.y_test]), minlength=10)
    assert np.all(np.abs(np.bincount(d.y_train, minlength=10) - total * 1038 / 1484) <= 1)


def test_yeast_loader_is_deterministic():
    a = load_uci_csv("yeast", os.path.join(DATA, "yeast"))
    b = load_uci_csv("yeast", os.path.join(DATA, "yeast"))
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != load_uci_csv("yeast", os.path.join(DATA, "yeast"), seed=1).fingerprint()


def test_standardization_uses_train_statistics_only():
    d = load_uci_csv("yeast", os.path.join(DATA, "yeast"))
    raw = load_uci_csv("yeast", os.path.join(DATA, "yeast"), standardized=False)
    assert np.allclose(d.mean, raw.x_train.mean(axis=0), rtol=0, atol=1e-15)
    assert np.allclose(d.std, raw.x_train.std(axis=0), rtol=0, atol=1e-15)
    assert np.allclose(d.x_train.mean(axis=0), 0, atol=1e-9)
    live = raw.x_train.std(axis=0) > 0
    assert np.allclose(d.x_train.std(axis=0)[live], 1, atol=1e-9)
    assert np.allclose(d.x_test, (raw.x_test - d.mean) / d.std)


def test_standardize_constant_column():
    xtr, xte, mean, std = standardize(np.array([[1.0, 2.0], [1.0, 4.0]]), np.array([[1.0, 3.0]]))
    assert np.array_equal(xtr[:, 0], [0, 0]) and std[0] == 1.0


def test_yeast_malformed_rows(tmp_path):
    (tmp_path / "yeast.data").write_text("A 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 CYT\nB 0.1 0.2 CYT\n")
    with pytest.raises(FormatError, match=":2:"):
        load_uci_csv("yeast", str(tmp_path))
    (tmp_path / "yeast.data").write_text("A 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 XYZ\n")
    with pytest.raises(VocabularyError):
        load_uci_csv("yeast", str(tmp_path))


def test_letter_layout(tmp_path):
    g = np.random.default_rng(0)
    rows = [",".join([chr(65 + i % 26)] + [str(v) for v in g.integers(0, 16, 16)]) for i in range(20000)]
    (tmp_path / "letter-recognition.data").write_text("\n".join(rows) + "\n")
    d = load_uci_csv("letter", str(tmp_path))
    assert (len(d.y_train), len(d.y_test), d.x_train.shape[1], d.n_classes) == (16000, 4000, 16, 26)
    assert d.y_train[0] == 0 and d.y_train[25] == 25
    (tmp_path / "letter-recognition.data").write_text("a," + ",".join(["1"] * 16) + "\n")
    with pytest.raises(VocabularyError):
        load_uci_csv("letter", str(tmp_path))


ADULT_ROW = ("39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, "
             "White, Male, 2174, 0, 40, United-States, <=50K")
ADULT_ROW2 = ("50, ?, 83311, HS-grad, 9, Married-civ-spouse, ?, Husband, Black, Female, 0, 0, 13, "
              "?, >50K")


def test_adult_layout(tmp_path):
    (tmp_path / "adult.data").write_text(f"{ADULT_ROW}\n{ADULT_ROW2}\n\n")
    (tmp_path / "adult.test").write_text(f"|1x3 Cross validator\n{ADULT_ROW}.\n{ADULT_ROW2}.\n")
    d = load_uci_csv("adult", str(tmp_path))
    width = sum(1 if v is None else len(v) + 1 for _, v in ADULT_COLUMNS)
    assert d.x_train.shape == (2, width) and d.x_test.shape == (2, width)
    assert list(d.y_train) == [0, 1] and list(d.y_test) == [0, 1]
    assert np.allclose(d.x_train.mean(axis=0), 0, atol=1e-9)


def test_adult_unknown_category(tmp_path):
    (tmp_path / "adult.data").write_text(ADULT_ROW.replace("State-gov", "Space-agency") + "\n")
    (tmp_path / "adult.test").write_text(ADULT_ROW + ".\n")
    with pytest.raises(VocabularyError, match="workclass"):
        load_uci_csv("adult", str(tmp_path))


def test_unknown_uci_name():
    with pytest.raises(ConfigError):
        load_uci_csv("iris", DATA)


def test_split_seventy_percent_of_yeast():
    d = load_uci_csv("yeast", os.path.join(DATA, "yeast"))
    y = np.concatenate([d.y_train, d.y_test])
    full = Dataset("yeast", np.zeros((len(y), 1)), y, np.zeros((0, 1)), np.zeros(0, int), 10)
    s = split(full, 0.7, seed=4)
    assert (len(s.y_train), len(s.y_test)) == (1038, 446)
    assert np.all(np.abs(np.bincount(s.y_train, minlength=10) - np.bincount(y) * 0.7) <= 1)


def test_split_half_of_balanced_set():
    y = np.repeat([0, 1], 10)
    full = Dataset("b", np.arange(20.0)[:, None], y, np.zeros((0, 1)), np.zeros(0, int), 2)
    s = split(full, 0.5, seed=0)
    assert list(np.bincount(s.y_train)) == [5, 5] and list(np.bincount(s.y_test)) == [5, 5]
    assert split(full, 0.5, seed=0).fingerprint() == s.fingerprint()


def test_split_errors():
    full = Dataset("b", np.zeros((3, 1)), [0, 0, 1], np.zeros((0, 1)), np.zeros(0, int), 2)
    with pytest.raises(ContractError):
        split(full, 0.5, 0)
    with pytest.raises(ContractError):
        stratified_indices([0, 0, 1, 1], 1.0, 0)


@given(st.lists(st.integers(0, 4), min_size=10, max_size=200), st.floats(0.05, 0.95),
       st.integers(0, 1000))
def test_split_property(labels, fraction, seed):
    labels = np.array(labels)
    if np.bincount(labels)[np.bincount(labels) > 0].min() < 2:
        return
    tr, te = stratified_indices(labels, fraction, seed)
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == len(labels)
    assert len(tr) == int(np.floor(len(labels) * fraction + 1e-9))
    for c in np.unique(labels):
        n = np.sum(labels == c)
        assert abs(np.sum(labels[tr] == c) - n * fraction) <= 1


def test_download_requires_consent(tmp_path):
    with pytest.raises(ConfigError, match="consent"):
        download("https://example.invalid/x", str(tmp_path / "x"))
