"""Run both shipped experiments and write records, summaries, box plots and diagnostics.

    python scripts/run_experiments.py --out-dir results --threads 4
"""
import argparse
import sys
from pathlib import Path

from rwre_mle.cli import main as cli_main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--replicates", type=int)
    args = ap.parse_args()
    code = 0
    for name in ("two_point", "temkin"):
        argv = ["experiment", str(CONFIGS / f"{name}.toml"), "--out-dir", args.out_dir, "--threads", str(args.threads)]
        if args.replicates:
            argv += ["--replicates", str(args.replicates)]
        code = max(code, cli_main(argv))
    return code


if __name__ == "__main__":
    sys.exit(main())
