#!/usr/bin/env python3
"""t-SNE reducer for `longsteer analyze --projection tsne`.

Reads one sample per CSV row and writes one "x,y" row per sample.
"""
import argparse

import numpy as np
from sklearn.manifold import TSNE


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--perplexity", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    x = np.loadtxt(args.input, delimiter=",", ndmin=2)
    perplexity = min(args.perplexity, max(1.0, (len(x) - 1) / 3.0))
    y = TSNE(n_components=2, perplexity=perplexity, random_state=args.seed,
             init="pca").fit_transform(x)
    np.savetxt(args.output, y, delimiter=",", fmt="%.10g")


if __name__ == "__main__":
    main()
