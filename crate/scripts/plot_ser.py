#!/usr/bin/env python3
"""Plot SER against SNR from a `qam-sdr simulate` CSV."""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    curves = defaultdict(list)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            curves[row["detector"]].append((float(row["snr_db"]), float(row["ser"])))
    return curves


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="ser.png")
    ap.add_argument("--title", default=None)
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for det, pts in sorted(load(args.csv).items()):
        pts.sort()
        snr = [p[0] for p in pts]
        # Zero SER has no place on a log axis.
        ser = [p[1] if p[1] > 0 else float("nan") for p in pts]
        ax.semilogy(snr, ser, marker="o", label=det)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("SER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if args.title:
        ax.set_title(args.title)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
