#!/usr/bin/env python3
"""Run experiment configs and print the headline summary of each.

    python scripts/run_configs.py                   # every file in configs/
    python scripts/run_configs.py configs/ratio_dgff.cfg --out results
"""
import argparse
import warnings
from pathlib import Path

from levelset_lab.experiments import load_config, run, summarize, read_csv

ROOT = Path(__file__).resolve().parent.parent


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("configs", nargs="*", type=Path)
    p.add_argument("--out", type=Path, default=ROOT / "out")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    paths = args.configs or sorted((ROOT / "configs").glob("*.cfg"))
    for path in paths:
        cfg = load_config(path)
        cfg.output_dir = str(args.out / path.stem)
        cfg.workers = args.workers
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            manifest = run(cfg)
        summary = summarize(read_csv(manifest["csv"]))
        print(f"== {path.name}  ({manifest['wall_seconds']:.1f}s)")
        for g in summary["groups"]:
            params = {k: g[k] for k in ("alpha", "epsilon", "delta", "z") if k in g}
            target = "" if g["target"] is None else f"  target {g['target']:.4f}"
            med = "n/a" if g["median"] is None else f"{g['median']:.4f}"
            print(f"  size {g['size']:>6} {params}  median {g['statistic']} {med}{target}")
        for t in summary["trends"]:
            flag = t.get("toward_target", t.get("increasing"))
            print(f"  trend {t['sizes']}: monotone={flag} majority={t['majority_improving']}")


if __name__ == "__main__":
    main()
