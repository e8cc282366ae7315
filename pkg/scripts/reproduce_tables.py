#!/usr/bin/env python3
"""Run the table configs in configs/ and print errors with averaged EOCs.

usage: python3 scripts/reproduce_tables.py [NAME ...] [--out DIR]
NAME is a config stem such as mp1_coupled; default is all configs.
"""

import argparse
import json
from pathlib import Path

from lodwave.cli import ExperimentConfig, run_experiment
from lodwave.experiments import NORMS, ErrorRecord, eoc_by_norm

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("names", nargs="*")
    parser.add_argument("--out", type=Path, default=Path("out"))
    args = parser.parse_args()
    names = args.names or sorted(p.stem for p in CONFIGS.glob("*.json"))
    for name in names:
        data = json.loads((CONFIGS / f"{name}.json").read_text())
        data["output_dir"] = str(args.out / name)
        cfg = ExperimentConfig.from_dict(data)
        summary = run_experiment(cfg)
        print(f"\n== {name} ({cfg.problem_id}, h=2^-{cfg.h_exponent}) ==")
        print("H_exp  k  " + "  ".join(f"{n:>12s}" for n in NORMS))
        recs = []
        for row in summary["results"]:
            print(f"{row['H_exp']:5d} {row['k']:2d}  " + "  ".join(f"{row[n]:12.4f}" for n in NORMS))
            recs.append(ErrorRecord(row["H_exp"], cfg.h_exponent, row["k"], cfg.dt, cfg.T, *(row[n] for n in NORMS)))
        if cfg.k_values == "log-coupled" and len(recs) > 1:
            eoc = eoc_by_norm(recs)
            print("EOC      " + "  ".join(f"{eoc[n].average:12.2f}" for n in NORMS))


if __name__ == "__main__":
    main()
