"""Censored fraction per n under the step-cap rules.

``largest_n`` caps every n at 500 * n_max^(1/kappa); ``per_n`` caps each n at
500 * n^(1/kappa). Fractions are marginal per n. Only hitting times are needed, so no estimation is run.

    python scripts/censoring_study.py --replicates 1000
"""
import argparse
from pathlib import Path

import numpy as np

from rwre_mle.harness import TMaxRule, load_spec, replicate_seeds
from rwre_mle.walk_sim import Walker, gen_environment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def hitting_times(spec, replicates):
    """T_n for every replicate and n on one walk; inf once the largest cap is hit."""
    cap = TMaxRule("largest_n").cap(spec.n_list[-1], spec.n_list[-1], spec.kappa)
    out = np.full((replicates, len(spec.n_list)), np.inf)
    for r in range(replicates):
        env_seed, walk_seed = replicate_seeds(spec.seed, r)
        w = Walker(gen_environment(spec.model, env_seed), np.random.default_rng(walk_seed), cap)
        for j, n in enumerate(spec.n_list):
            o = w.advance_to(n)
            if not o.hit:
                break
            out[r, j] = o.total_steps
    return out


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicates", type=int, default=1000)
    args = ap.parse_args()
    print("example,n,cap_largest_n,censored_largest_n,cap_per_n,censored_per_n")
    for name in ("two_point", "temkin"):
        spec = load_spec(CONFIGS / f"{name}.toml")
        t = hitting_times(spec, args.replicates)
        n_max = spec.n_list[-1]
        for j, n in enumerate(spec.n_list):
            big = TMaxRule("largest_n").cap(n, n_max, spec.kappa)
            small = TMaxRule("per_n").cap(n, n_max, spec.kappa)
            print(f"{name},{n},{big},{np.mean(t[:, j] > big):.4f},{small},{np.mean(t[:, j] > small):.4f}")


if __name__ == "__main__":
    main()
