"""Quantized ring of eight Gaussians: fit, score, sample, and draw.

Prints the train NLL after each TSP, the test NLL, and a coarse text
picture of the data next to samples drawn from the model.

    python demos/eight_gaussians.py [num_tsps] [max_depth]
"""

import sys

import numpy as np

from dtf import FitConfig, fit_dtf, mean_nll, sample
from dtf.data import gen_eight_gaussian

SHADES = " .:-=+*#%@"


def picture(values, cells=23):
    # 91 bins per axis folded into a cells x cells grid
    grid = np.zeros((cells, cells))
    idx = values * cells // 91
    np.add.at(grid, (idx[:, 1], idx[:, 0]), 1)
    grid = np.log1p(grid)
    grid = (grid / grid.max() * (len(SHADES) - 1)).astype(int)
    return ["".join(SHADES[v] for v in row) for row in grid[::-1]]


def main():
    num_tsps = int(sys.argv[1]) if len(sys.argv) > 1 else 4
    depth = int(sys.argv[2]) if len(sys.argv) > 2 else 8
    train, test = gen_eight_gaussian(seed=0)
    model = fit_dtf(train, FitConfig(max_depth=depth, num_tsps=num_tsps))

    for stage, nll in enumerate(model.fit_metadata["train_nll_trace"]):
        print(f"after {stage} TSPs: train NLL {nll:.4f} nats")
    print(f"test NLL {mean_nll(model, test):.4f} nats, {model.num_parameters()} parameters")

    drawn = sample(model, test.n, seed=1)
    print(f"\n{'data':<25}{'samples'}")
    for left, right in zip(picture(test.values), picture(drawn.values)):
        print(f"{left}  {right}")


if __name__ == "__main__":
    main()
