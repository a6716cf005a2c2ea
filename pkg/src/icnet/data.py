"""Datasets: XOR, MNIST (IDX files) and the UCI tables YEAST, LETTER and ADULT.

Every loader returns an immutable :class:`Dataset`. Tabular features are
standardized with statistics from the training split only.
"""
from __future__ import annotations

import gzip
import os
import struct
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DimensionError, FormatError, LabelError, VocabularyError


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    name: str
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int
    layout: str = "vector"
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __post_init__(self):
        if self.layout not in ("vector", "image", "sequence"):
            raise ValueError(f"unknown layout {self.layout!r}")
        for attr, dtype in (("x_train", np.float64), ("x_test", np.float64),
                            ("y_train", np.int64), ("y_test", np.int64)):
            object.__setattr__(self, attr, _frozen(getattr(self, attr), dtype))
        if self.x_train.shape[1:] != self.x_test.shape[1:]:
            raise DimensionError(f"train features {self.x_train.shape[1:]} and test features "
                                 f"{self.x_test.shape[1:]} differ")
        for split in ("train", "test"):
            x, y = getattr(self, "x_" + split), getattr(self, "y_" + split)
            if len(x) != len(y):
                raise DimensionError(f"{split}: {len(x)} examples but {len(y)} labels")
            if len(y) and (y.min() < 0 or y.max() >= self.n_classes):
                raise LabelError(f"{split} labels outside [0, {self.n_classes})")

    @property
    def input_shape(self):
        return self.x_train.shape[1:]

    def subset(self, n):
        """First ``n`` training examples; the test split is unchanged."""
        return Dataset(self.name, self.x_train[:n], self.y_train[:n], self.x_test, self.y_test,
                       self.n_classes, self.layout, self.mean, self.std)

    def fingerprint(self):
        import hashlib

        h = hashlib.sha256()
        for a in (self.x_train, self.y_train, self.x_test, self.y_test):
            h.update(str(a.shape).encode())
            h.update(a.tobytes())
        return h.hexdigest()


def make_xor() -> Dataset:
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    return Dataset("xor", x, y, x, y, 2)


# ---------------------------------------------------------------- MNIST / IDX

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


def _read_bytes(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path, expect_magic):
    """Parse one big-endian IDX file of unsigned bytes."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated header at byte {len(raw)}")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expect_magic:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{expect_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated dimension list at byte {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise FormatError(f"{path}: truncated payload at byte {len(raw)}, "
                          f"expected {header + size} bytes")
    if len(raw) > header + size:
        raise FormatError(f"{path}: {len(raw) - header - size} trailing bytes at byte {header + size}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def _resolve(paths, names):
    """Map ``paths`` (a directory or a dict) onto the expected file keys."""
    if isinstance(paths, (str, os.PathLike)):
        out = {}
        for key, stem in names.items():
            for cand in (stem, stem + ".gz"):
                full = os.path.join(paths, cand)
                if os.path.exists(full):
                    out[key] = full
                    break
            else:
                raise FileNotFoundError(f"{stem}[.gz] not found in {paths}")
        return out
    missing = set(names) - set(paths)
    if missing:
        raise ConfigError(f"missing paths: {sorted(missing)}")
    return dict(paths)


def load_mnist_idx(paths, subset=None, flatten=False) -> Dataset:
    """MNIST from IDX files; pixels scaled to [0, 1].

    ``subset`` keeps the first ``subset`` training examples. Images come as
    ``1 x 28 x 28`` tensors unless ``flatten`` is set.
    """
    p = _resolve(paths, MNIST_FILES)
    xtr = read_idx(p["train_images"], IDX_IMAGES)
    ytr = read_idx(p["train_labels"], IDX_LABELS)
    xte = read_idx(p["test_images"], IDX_IMAGES)
    yte = read_idx(p["test_labels"], IDX_LABELS)
    for x, y, split in ((xtr, ytr, "train"), (xte, yte, "test")):
        if x.ndim != 3 or y.ndim != 1 or len(x) != len(y):
            raise FormatError(f"{split}: image array {x.shape} does not pair with labels {y.shape}")
    if subset is not None:
        xtr, ytr = xtr[:subset], ytr[:subset]

    def scale(x):
        x = x.astype(np.float64) / 255.0
        return x.reshape(len(x), -1) if flatten else x[:, None, :, :]

    return Dataset("mnist", scale(xtr), ytr, scale(xte), yte, 10,
                   "vector" if flatten else "image")


# ---------------------------------------------------------------- UCI tables

YEAST_CLASSES = ("CYT", "NUC", "MIT", "ME3", "ME2", "ME1", "EXC", "VAC", "POX", "ERL")
YEAST_TRAIN_FRACTION = 1038 / 1484
YEAST_SPLIT_SEED = 20240501

LETTER_CLASSES = tuple(chr(ord("A") + i) for i in range(26))
LETTER_TRAIN = 16000

ADULT_COLUMNS = (
    ("age", None),
    ("workclass", ("Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
                   "State-gov", "Without-pay", "Never-worked")),
    ("fnlwgt", None),
    ("education", ("Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
                   "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th",
                   "Doctorate", "5th-6th", "Preschool")),
    ("education-num", None),
    ("marital-status", ("Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
                        "Married-spouse-absent", "Married-AF-spouse")),
    ("occupation", ("Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
                    "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                    "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
                    "Armed-Forces")),
    ("relationship", ("Wife", "Own-child", "Husband", "Not-in-family", "Other-relative",
                      "Unmarried")),
    ("race", ("White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black")),
    ("sex", ("Female", "Male")),
    ("capital-gain", None),
    ("capital-loss", None),
    ("hours-per-week", None),
    ("native-country", ("United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
                        "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China",
                        "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
                        "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic",
                        "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
                        "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
                        "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands")),
)
ADULT_LABELS = {"<=50K": 0, ">50K": 1}
MISSING = "?"


def _parse_float(tok, path, lineno):
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: cannot parse {tok!r} as a number") from None


def read_yeast(path):
    feats, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 10:
                raise FormatError(f"{path}:{lineno}: expected 10 fields, got {len(parts)}")
            if parts[9] not in YEAST_CLASSES:
                raise VocabularyError(f"{path}:{lineno}: unknown class {parts[9]!r}")
            feats.append([_parse_float(t, path, lineno) for t in parts[1:9]])
            labels.append(YEAST_CLASSES.index(parts[9]))
    return np.array(feats).reshape(-1, 8), np.array(labels, dtype=np.int64)


def read_letter(path):
    feats, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 17:
                raise FormatError(f"{path}:{lineno}: expected 17 fields, got {len(parts)}")
            if parts[0] not in LETTER_CLASSES:
                raise VocabularyError(f"{path}:{lineno}: unknown letter {parts[0]!r}")
            labels.append(LETTER_CLASSES.index(parts[0]))
            feats.append([_parse_float(t, path, lineno) for t in parts[1:]])
    return np.array(feats).reshape(-1, 16), np.array(labels, dtype=np.int64)


def _adult_width():
    return sum(1 if vocab is None else len(vocab) + 1 for _, vocab in ADULT_COLUMNS)


def read_adult(path):
    """One-hot encoded ADULT rows; ``?`` is its own category per field."""
    rows, labels = [], []
    width = _adult_width()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            parts = [t.strip() for t in line.split(",")]
            if len(parts) != len(ADULT_COLUMNS) + 1:
                raise FormatError(f"{path}:{lineno}: expected {len(ADULT_COLUMNS) + 1} fields, "
                                  f"got {len(parts)}")
            label = parts[-1].rstrip(".")
            if label not in ADULT_LABELS:
                raise VocabularyError(f"{path}:{lineno}: unknown income label {parts[-1]!r}")
            vec = np.zeros(width)
            pos = 0
            for (col, vocab), tok in zip(ADULT_COLUMNS, parts):
                if vocab is None:
                    vec[pos] = _parse_float(tok, path, lineno)
                    pos += 1
                    continue
                if tok == MISSING:
                    vec[pos + len(vocab)] = 1.0
                elif tok in vocab:
                    vec[pos + vocab.index(tok)] = 1.0
                else:
                    raise VocabularyError(f"{path}:{lineno}: unknown {col} category {tok!r}")
                pos += len(vocab) + 1
            rows.append(vec)
            labels.append(ADULT_LABELS[label])
    return np.array(rows).reshape(-1, width), np.array(labels, dtype=np.int64)


def standardize(x_train, x_test):
    """Scale to zero mean and unit std using training statistics only.

    Constant training columns keep std 1 so they map to zero.
    """
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (x_train - mean) / std, (x_test - mean) / std, mean, std


def stratified_indices(labels, fraction, seed):
    """Train/test index arrays with per-class counts within 1 of ``fraction``.

    The training total is ``floor(N * fraction)``; leftover slots go to the
    classes with the largest fractional remainders.
    """
    if not 0 < fraction < 1:
        raise ContractError(f"fraction must lie in (0, 1), got {fraction}")
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if np.any(counts < 2):
        small = classes[counts < 2].tolist()
        raise ContractError(f"classes {small} have fewer than 2 examples")
    exact = counts * fraction
    take = np.floor(exact).astype(int)
    spare = int(np.floor(len(labels) * fraction + 1e-9)) - take.sum()
    order = np.lexsort((classes, -(exact - take)))
    take[order[:spare]] += 1
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c, k in zip(classes, take):
        idx = rng.permutation(np.flatnonzero(labels == c))
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(dataset: Dataset, fraction, seed) -> Dataset:
    """Re-split the training portion of ``dataset`` into train/test.

    Any stored standardization is dropped since its statistics came from the
    old training split.
    """
    tr, te = stratified_indices(dataset.y_train, fraction, seed)
    x, y = dataset.x_train, dataset.y_train
    return Dataset(dataset.name, x[tr], y[tr], x[te], y[te], dataset.n_classes, dataset.layout)


def _tabular(name, xtr, ytr, xte, yte, n_classes, standardized=True):
    mean = std = None
    if standardized:
        xtr, xte, mean, std = standardize(xtr, xte)
    return Dataset(name, xtr, ytr, xte, yte, n_classes, "vector", mean, std)


UCI_FILES = {
    "yeast": {"data": "yeast.data"},
    "letter": {"data": "letter-recognition.data"},
    "adult": {"train": "adult.data", "test": "adult.test"},
}


def load_uci_csv(name, paths, seed=YEAST_SPLIT_SEED, standardized=True) -> Dataset:
    """Load one of ``yeast``, ``letter`` or ``adult`` in its published layout.

    YEAST has no official split and gets a seeded stratified 1038/446 split;
    LETTER uses its first 16000 rows for training; ADULT ships its own test
    file. ``paths`` is a directory or a dict with the keys in ``UCI_FILES``.
    """
    if name not in UCI_FILES:
        raise ConfigError(f"unknown UCI dataset {name!r}; expected one of {sorted(UCI_FILES)}")
    p = _resolve(paths, UCI_FILES[name])
    if name == "yeast":
        x, y = read_yeast(p["data"])
        tr, te = stratified_indices(y, YEAST_TRAIN_FRACTION, seed)
        return _tabular(name, x[tr], y[tr], x[te], y[te], len(YEAST_CLASSES), standardized)
    if name == "letter":
        x, y = read_letter(p["data"])
        if len(y) <= LETTER_TRAIN:
            raise FormatError(f"{p['data']}: {len(y)} rows, need more than {LETTER_TRAIN}")
        return _tabular(name, x[:LETTER_TRAIN], y[:LETTER_TRAIN], x[LETTER_TRAIN:],
                        y[LETTER_TRAIN:], 26, standardized)
    xtr, ytr = read_adult(p["train"])
    xte, yte = read_adult(p["test"])
    return _tabular(name, xtr, ytr, xte, yte, 2, standardized)


DEFAULT_MIRRORS = {
    "yeast": "https://archive.ics.uci.edu/ml/machine-learning-databases/yeast/yeast.data",
    "letter": "https://archive.ics.uci.edu/ml/machine-learning-databases/letter-recognition/"
              "letter-recognition.data",
    "adult.data": "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data",
    "adult.test": "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.test",
}


def download(url, dest, consent=False, timeout=60):
    """Fetch ``url`` to ``dest``. Refuses to touch the network without consent."""
    if not consent:
        raise ConfigError(f"refusing to download {url} without explicit consent")
    os.makedirs(os.path.dirname(os.path.abspath(dest)), exist_ok=True)
    tmp = dest + ".part"
    with urllib.request.urlopen(url, timeout=timeout) as resp, open(tmp, "wb") as out:
        out.write(resp.read())
    os.replace(tmp, dest)
    return dest
