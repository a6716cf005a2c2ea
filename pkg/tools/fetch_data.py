"""Rebuild data/ from packages on the npm and PyPI registries.

    python3 tools/fetch_data.py --yes [--dest data] [--mnist-train 10000]

MNIST comes from the ``mnist-data`` npm tarball (IDX files). ADULT ships in
the ``responsibly`` wheel. The 10-class YEAST table is reassembled from the
KEEL one-vs-rest / one-vs-one files in the ``imbalanced_databases`` wheel:
every row starts with all ten labels as candidates and each binary file
removes the ones it contradicts. LETTER has no registry copy; place
``letter-recognition.data`` under ``<dest>/letter`` by hand.

Nothing is downloaded without ``--yes``.
"""
import argparse
import glob
import gzip
import os
import shutil
import subprocess
import sys
import tarfile
import tempfile
import zipfile
from collections import Counter, defaultdict

MNIST_NPM = "mnist-data@1.2.6"
KEEL_WHEEL = "imbalanced_databases==0.1.1"
ADULT_WHEEL = "responsibly==0.1.2"

# label order used by the KEEL file names (yeast-<a>_vs_<b>)
KEEL_CLASSES = ["MIT", "NUC", "CYT", "ME1", "ME2", "ME3", "EXC", "VAC", "POX", "ERL"]
KEEL_ATTRS = ["mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc"]
ONE_VS_REST = [("yeast1", "NUC"), ("yeast3", "ME3"), ("yeast4", "ME2"), ("yeast5", "ME1"),
               ("yeast6", "EXC")]


def run(cmd, cwd):
    print("+", " ".join(cmd))
    subprocess.run(cmd, cwd=cwd, check=True)


def fetch_wheel(spec, tmp):
    run([sys.executable, "-m", "pip", "download", "--no-deps", "-q", spec, "-d", tmp], tmp)
    name = spec.split("==")[0]
    return zipfile.ZipFile(glob.glob(os.path.join(tmp, f"{name}-*.whl"))[0])


def mnist(dest, tmp, n_train):
    run(["npm", "pack", MNIST_NPM], tmp)
    with tarfile.open(glob.glob(os.path.join(tmp, "mnist-data-*.tgz"))[0]) as tar:
        tar.extractall(tmp, filter="data")
    os.makedirs(dest, exist_ok=True)
    for stem, row in (("train-images-idx3-ubyte", 784), ("train-labels-idx1-ubyte", 1),
                      ("t10k-images-idx3-ubyte", 784), ("t10k-labels-idx1-ubyte", 1)):
        with open(os.path.join(tmp, "package", "data", stem), "rb") as fh:
            raw = fh.read()
        header = 16 if row == 784 else 8
        if stem.startswith("train") and n_train:
            # rewrite the item count so the truncated file stays a valid IDX file
            raw = raw[:4] + n_train.to_bytes(4, "big") + raw[8:header] + raw[header:header + n_train * row]
        with gzip.GzipFile(os.path.join(dest, stem + ".gz"), "wb", mtime=0) as out:
            out.write(raw)


def _read_keel(path):
    attrs, rows = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("@attribute") and line.split()[1].lower() != "class":
                attrs.append(line.split()[1].lower())
            if not line or line.startswith("@"):
                continue
            *feat, label = [t.strip() for t in line.split(",")]
            rows.append((tuple("%.2f" % float(v) for v in feat), label == "positive"))
    return attrs, rows


def yeast(dest, tmp):
    root = os.path.join(tmp, "keel")
    fetch_wheel(KEEL_WHEEL, tmp).extractall(root)
    data = os.path.join(root, "imbalanced_databases", "data")

    def path(name):
        return os.path.join(data, name, name + ".dat")

    _, base = _read_keel(path("yeast1"))
    feats = [f for f, _ in base]
    cand = [set(KEEL_CLASSES) for _ in feats]

    def narrow(attrs, rows, pos, neg):
        cols = [KEEL_ATTRS.index(a) for a in attrs]
        both = pos | neg
        groups = defaultdict(list)
        for i, f in enumerate(feats):
            groups[tuple(f[c] for c in cols)].append(i)
        counts = defaultdict(lambda: [0, 0])
        for f, positive in rows:
            counts[f][0 if positive else 1] += 1
        for f, idx in groups.items():
            npos, nneg = counts.get(f, (0, 0))
            live = [i for i in idx if cand[i] & both]
            if npos + nneg == 0:
                keep = {i: set() for i in idx}
            elif npos == len(live) and nneg == 0:
                keep = {i: pos if i in live else set() for i in idx}
            elif nneg == len(live) and npos == 0:
                keep = {i: neg if i in live else set() for i in idx}
            else:
                continue  # duplicates with mixed labels; resolved by other files
            for i, allowed in keep.items():
                cand[i] = (cand[i] - both) | (cand[i] & allowed)

    for _ in range(3):
        for name, cls in ONE_VS_REST:
            narrow(*_read_keel(path(name)), {cls}, set(KEEL_CLASSES) - {cls})
        for d in sorted(glob.glob(os.path.join(data, "yeast-*"))):
            name = os.path.basename(d)
            if name == "yeast-2_vs_8":
                continue  # one CYT row is missing from this file upstream
            a, b = name[len("yeast-"):].split("_vs_")
            narrow(*_read_keel(path(name)), {KEEL_CLASSES[int(k)] for k in b.split("-")},
                   {KEEL_CLASSES[int(k)] for k in a.split("-")})
    open_rows = [i for i, c in enumerate(cand) if len(c) != 1]
    if open_rows:
        raise SystemExit(f"yeast: {len(open_rows)} rows have ambiguous labels")
    labels = [next(iter(c)) for c in cand]
    print("yeast class counts:", dict(Counter(labels)))
    os.makedirs(dest, exist_ok=True)
    with open(os.path.join(dest, "yeast.data"), "w") as out:
        for i, (f, lab) in enumerate(zip(feats, labels)):
            out.write("ROW%04d  " % (i + 1) + "  ".join(f) + "  " + lab + "\n")


def adult(dest, tmp):
    wheel = fetch_wheel(ADULT_WHEEL, tmp)
    os.makedirs(dest, exist_ok=True)
    for name in ("adult.data", "adult.test"):
        with wheel.open(f"responsibly/dataset/adult/{name}") as src, \
                open(os.path.join(dest, name), "wb") as out:
            shutil.copyfileobj(src, out)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--yes", action="store_true", help="consent to downloading from the registries")
    p.add_argument("--dest", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    p.add_argument("--mnist-train", type=int, default=10000,
                   help="keep the first N training images (0 keeps all 60000)")
    p.add_argument("--only", choices=["mnist", "yeast", "adult"], action="append")
    args = p.parse_args(argv)
    if not args.yes:
        print("refusing to download without --yes", file=sys.stderr)
        return 2
    wanted = args.only or ["mnist", "yeast", "adult"]
    with tempfile.TemporaryDirectory() as tmp:
        if "mnist" in wanted:
            mnist(os.path.join(args.dest, "mnist"), tmp, args.mnist_train)
        if "yeast" in wanted:
            yeast(os.path.join(args.dest, "yeast"), tmp)
        if "adult" in wanted:
            adult(os.path.join(args.dest, "adult"), tmp)
    return 0


if __name__ == "__main__":
    sys.exit(main())
