"""W_1 to the unit circle shrinks with the budget while Jensen-Shannon stays at ln 2."""

import argparse
import math
from dataclasses import dataclass

from relugen.experiments import circle_fdiv_demo


@dataclass
class Settings:
    budgets: tuple = ((15, 2), (15, 4), (15, 8), (15, 16))
    batch: int = 1000
    reps: int = 5
    seed: int = 0


def main(s: Settings) -> None:
    print(f"{'W':>3} {'L':>3} {'W^2L':>6} {'atoms':>5} {'W1':>9} {'ci':>8} {'JS':>9}")
    for r in circle_fdiv_demo(s.budgets, seed=s.seed, batch=s.batch, reps=s.reps):
        print(f"{r.W:3d} {r.L:3d} {r.w2l:6d} {r.atoms:5d} {r.w1:9.5f} {r.ci:8.5f} {r.js:9.6f}")
    print(f"ln 2 = {math.log(2):.6f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--batch", type=int, default=1000)
    a = ap.parse_args()
    main(Settings(batch=a.batch, seed=a.seed))
