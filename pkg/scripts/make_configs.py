"""Regenerate the JSON configs in scripts/configs from the fixtures in lqrtransfer.scenarios."""

import json
from pathlib import Path

from lqrtransfer import scenarios as sc

HERE = Path(__file__).resolve().parent / "configs"
GRID = list(range(10, 61, 5))


def model_dict(model):
    return {"A": model.A.tolist(), "B": model.B.tolist(), "C": model.C.tolist()}


def base(name):
    return {"name": name, "n": sc.N_ORDER, "T0": sc.TARGET_SAMPLES, "T1": 2 * sc.N_ORDER,
            "N": 2, "horizon": 40, "cost": {"Q": [[sc.Q_WEIGHT]], "R": [[sc.R_WEIGHT]]},
            "seed": 0, "dedup_tol": 1e-6, "out": f"../../runs/{name}"}


def main():
    fig1 = {"T_grid": GRID, "reference": "data", "reference_horizon": 200, "data": "transfer"}
    exact_sources = [model_dict(s) for s in sc.exact_sources()]
    configs = {
        "scenario_a_printed": dict(base("scenario_a_printed"), target=sc.TARGET,
                                   sources=[sc.SOURCE_1, sc.SOURCE_2], fig1=fig1),
        "scenario_a_exact": dict(base("scenario_a_exact"), target=model_dict(sc.exact_target()),
                                 sources=exact_sources, fig1=fig1),
        "fig2": dict(base("fig2_perturbed"), target=model_dict(sc.exact_target()),
                     sources=exact_sources,
                     fig2={"scales": [0.0, 0.005, 0.01, 0.02, 0.04, 0.08], "perturb": "modes"}),
    }
    HERE.mkdir(exist_ok=True)
    for name, cfg in configs.items():
        (HERE / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n")
        print("wrote", HERE / f"{name}.json")


if __name__ == "__main__":
    main()
