#!/usr/bin/env python3
"""Build the bundled CSV datasets.

breastw: Wisconsin breast cancer (original), rows with missing values dropped,
         malignant = anomaly. Source: the MASS ``biopsy`` table (any copy, e.g.
         the one shipped inside the ``pydataset`` package resources).
wine:    UCI wine as shipped with scikit-learn. Cultivars 2 and 3 are normal,
         10 rows of cultivar 1 (seeded draw) are anomalies.
thyroid: converted from an ODDS ``thyroid.mat`` (keys X, y) when one is given.

Usage:
    prepare_datasets.py --biopsy biopsy.csv [--thyroid-mat thyroid.mat] --out DIR
"""
import argparse
import csv
import os

import numpy as np


def write(path, names, x, y):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(names) + ["label"])
        for row, lab in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def breastw(src, out):
    with open(src) as f:
        rows = list(csv.DictReader(f))
    cols = [f"V{i}" for i in range(1, 10)]
    keep = [r for r in rows if all(r[c] != "NA" for c in cols)]
    x = np.array([[float(r[c]) for c in cols] for r in keep])
    y = np.array([1 if r["class"] == "malignant" else 0 for r in keep])
    write(os.path.join(out, "breastw.csv"), cols, x, y)
    return x.shape, int(y.sum())


def wine(out, seed=0):
    from sklearn.datasets import load_wine

    d = load_wine()
    normal = np.where(d.target != 0)[0]
    anom = np.sort(np.random.default_rng(seed).choice(np.where(d.target == 0)[0], 10, replace=False))
    idx = np.concatenate([normal, anom])
    y = (d.target[idx] == 0).astype(int)
    names = [n.replace("/", "_") for n in d.feature_names]
    write(os.path.join(out, "wine.csv"), names, d.data[idx], y)
    return d.data[idx].shape, int(y.sum())


def thyroid(mat, out):
    from scipy.io import loadmat

    m = loadmat(mat)
    x, y = m["X"], m["y"].ravel()
    write(os.path.join(out, "thyroid.csv"), [f"a{i}" for i in range(x.shape[1])], x, y)
    return x.shape, int(y.sum())


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--biopsy")
    p.add_argument("--thyroid-mat")
    p.add_argument("--out", required=True)
    a = p.parse_args()
    if a.biopsy:
        print("breastw", breastw(a.biopsy, a.out))
    print("wine", wine(a.out))
    if a.thyroid_mat:
        print("thyroid", thyroid(a.thyroid_mat, a.out))


if __name__ == "__main__":
    main()
