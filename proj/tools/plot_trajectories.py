#!/usr/bin/env python3
"""Plot tumor, effector and dose traces from `copos simulate` CSV files."""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", nargs="+", type=Path)
    ap.add_argument("-o", "--out", type=Path, default=Path("trajectories.png"))
    args = ap.parse_args()

    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
    for path in args.csv:
        d = load(path)
        axes[0].plot(d["t"], d["x1"], label=path.stem)
        axes[1].plot(d["t"], d["x2"], label=path.stem)
        axes[2].plot(d["t"], d["u1"], label=f"{path.stem} u1")
        axes[2].plot(d["t"], d["u2"], "--", label=f"{path.stem} u2")
    axes[0].set_ylabel("tumor x1 (1e6 cells)")
    axes[1].set_ylabel("effector x2")
    axes[2].set_ylabel("applied dose")
    axes[2].set_xlabel("time (days)")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
