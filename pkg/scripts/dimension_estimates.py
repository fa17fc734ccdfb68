"""Upper, lower and Minkowski dimension estimates for a square and a circle in R^3."""

import argparse
from dataclasses import dataclass

from relugen.dimension import estimate_lower_dimension, estimate_minkowski, estimate_upper_dimension
from relugen.measures import UniformCube, UniformSphere


@dataclass
class Settings:
    n_samples: int = 10_000
    p: float = 2.0
    delta: float = 0.05
    seed: int = 0


CASES = {
    "square": (lambda n, s: UniformCube(2).sample(n, s), [0.2, 0.1, 0.05, 0.025]),
    "circle in R^3": (lambda n, s: UniformSphere(1, 3).sample(n, s), [0.1, 0.05, 0.025, 0.0125]),
}


def main(s: Settings) -> None:
    for name, (draw, grid) in CASES.items():
        X = draw(s.n_samples, s.seed)
        up = estimate_upper_dimension(X, s.p, grid)
        low = estimate_lower_dimension(X, s.delta, grid)
        mink = estimate_minkowski(X, grid)
        print(f"{name}: lower {low.value:.3f}  upper {up.value:.3f}  minkowski {mink.value:.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    main(Settings(n_samples=a.samples, seed=a.seed))
