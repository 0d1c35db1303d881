"""Z versus gain error over randomly perturbed targets, repeated over several seeds."""

import argparse
import json
from pathlib import Path

from lqrtransfer.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    args = parser.parse_args()
    cfg = ROOT / "scripts" / "configs" / "fig2.json"
    rhos = []
    for seed in range(args.seeds):
        out = ROOT / "runs" / "fig2" / f"seed_{seed}"
        if cli(["fig2", "--config", str(cfg), "--out", str(out), "--seed", str(seed)]):
            raise SystemExit(1)
        rhos.append(json.loads((out / "fig2.json").read_text())["spearman"])
        print(f"seed {seed}: Spearman {rhos[-1]:.3f}")
    print(f"positive in {sum(r > 0 for r in rhos)}/{len(rhos)} seeds")
