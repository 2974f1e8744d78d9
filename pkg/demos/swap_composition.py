"""Any permutation of a small configuration space as a stack of TSPs.

Each TSP in the stack exchanges two neighbouring configurations along a
snake-order walk and leaves everything else fixed. Composing them
bubble-sorts the identity into the requested permutation.

    python demos/swap_composition.py
"""

import numpy as np

from dtf.core import all_configurations, configuration_index
from dtf.oracle import compose_forward, realize_arbitrary_permutation, snake_path
from dtf.tsp import check_invertibility

CARDS = (3, 2)


def main():
    configs = all_configurations(CARDS)
    print("snake order:", " ".join("".join(map(str, c)) for c in snake_path(CARDS)))

    rng = np.random.default_rng(4)
    target = rng.permutation(len(configs)).tolist()
    tsps = realize_arbitrary_permutation(target, CARDS)
    assert all(check_invertibility(t).ok for t in tsps)
    print(f"target {target} needs {len(tsps)} swap TSPs")

    z = compose_forward(tsps, configs)
    for x, y in zip(configs, z):
        print(f"  {tuple(x.tolist())} -> {tuple(y.tolist())}")
    assert configuration_index(z, CARDS).tolist() == target
    print("composition matches the target")


if __name__ == "__main__":
    main()
