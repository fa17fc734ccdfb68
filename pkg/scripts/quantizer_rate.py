"""Exact W_1 between an empirical uniform-cube measure and its shell quantization, n = 8..512."""

import argparse
from dataclasses import dataclass

import numpy as np

from relugen.measures import UniformCube, empirical_measure
from relugen.metrics import wasserstein_discrete
from relugen.quantize import quantize_shells


@dataclass
class Settings:
    n_samples: int = 5000
    dims: tuple = (1, 2, 3)
    seed: int = 0


def main(s: Settings) -> None:
    ns = np.array([2**k for k in range(3, 10)])
    for d in s.dims:
        X = UniformCube(d).sample(s.n_samples, s.seed)
        mu = empirical_measure(X)
        err = np.array([wasserstein_discrete(mu, quantize_shells(X, int(n), 1.0, 10.0), 1.0)[0] for n in ns])
        slope = np.polyfit(np.log(ns), np.log(err), 1)[0]
        print(f"d={d}: " + " ".join(f"{e:.4f}" for e in err) + f"  slope {slope:.3f}  slope*d {slope * d:.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    main(Settings(n_samples=a.samples, seed=a.seed))
