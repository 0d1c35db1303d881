"""Experiment runner: ``lqrtransfer {simulate,transfer,fig1,fig2} --config cfg.json``.

Exit codes: 0 success, 1 data/config problems, 2 rank failures,
3 target trajectory too short for transfer.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy.stats import spearmanr

from .blocks import ImpulseTrajectory, write_csv
from .ddlqr import OutputFeedbackGain, data_driven_gain, run_closed_loop
from .errors import (DataLengthError, LQRTransferError, RankError, SampleComplexityError,
                     ValidationError)
from .lti import CostSpec, StateSpaceModel, evaluate_cost, impulse_response, model_output_gain, \
    solve_riccati
from .modes import TransferReport, transfer_pipeline
from .scenarios import perturbed_targets

log = logging.getLogger("lqrtransfer")

EXIT_DATA, EXIT_RANK, EXIT_SAMPLES = 1, 2, 3


@dataclass
class SystemSpec:
    """One system in a config: an inline model or a trajectory file."""

    model: Optional[StateSpaceModel] = None
    file: Optional[Path] = None

    def trajectory(self, length: int) -> ImpulseTrajectory:
        if self.model is not None:
            if length < 1:
                raise DataLengthError("requested an empty trajectory (length must be >= 1)")
            return impulse_response(self.model, length)
        return ImpulseTrajectory.from_csv(self.file)


@dataclass
class ExperimentConfig:
    n: int
    T0: int
    T1: int
    horizon: int
    Q: np.ndarray
    R: np.ndarray
    targets: List[SystemSpec]
    sources: List[SystemSpec]
    seed: int = 0
    out: Path = Path("out")
    dedup_tol: float = 1e-6
    x0: Optional[np.ndarray] = None
    fig1: dict = field(default_factory=dict)
    fig2: dict = field(default_factory=dict)

    @property
    def cost(self) -> CostSpec:
        return CostSpec(self.Q, self.R, self.horizon)


def _system(entry: dict, base: Path) -> SystemSpec:
    has_model = all(key in entry for key in ("A", "B", "C"))
    has_file = "file" in entry
    if has_model == has_file:
        raise ValueError("each system needs exactly one of an inline model (A, B, C) or a file")
    if has_file:
        path = Path(entry["file"])
        return SystemSpec(file=path if path.is_absolute() else base / path)
    model = StateSpaceModel(np.array(entry["A"], dtype=float), np.array(entry["B"], dtype=float),
                            np.array(entry["C"], dtype=float))
    return SystemSpec(model=model.validate())


def load_config(path: Path, seed: Optional[int] = None, out: Optional[Path] = None
                ) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    raw = json.loads(path.read_text())
    base = path.parent
    if "targets" in raw:
        targets = [_system(e, base) for e in raw["targets"]]
    else:
        targets = [_system(raw["target"], base)]
    sources = [_system(e, base) for e in raw.get("sources", [])]
    if "N" in raw and raw["N"] != len(sources):
        raise ValueError(f"config says N = {raw['N']} but lists {len(sources)} sources")
    cost = raw.get("cost", {})
    return ExperimentConfig(
        n=int(raw["n"]), T0=int(raw.get("T0", raw["n"] + 1)), T1=int(raw.get("T1", 2 * raw["n"])),
        horizon=int(raw.get("horizon", 40)),
        Q=np.atleast_2d(np.array(cost.get("Q", 1.0), dtype=float)),
        R=np.atleast_2d(np.array(cost.get("R", 1.0), dtype=float)),
        targets=targets, sources=sources,
        seed=int(raw.get("seed", 0)) if seed is None else seed,
        out=Path(out) if out is not None else base / raw.get("out", "out"),
        dedup_tol=float(raw.get("dedup_tol", 1e-6)),
        x0=None if raw.get("x0") is None else np.array(raw["x0"], dtype=float),
        fig1=raw.get("fig1", {}), fig2=raw.get("fig2", {}),
    )


# -- output -------------------------------------------------------------------------------


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _trajectory_csv(data: ImpulseTrajectory) -> str:
    buf = StringIO()
    write_csv(data, buf)
    return buf.getvalue()


def _rows_csv(header: List[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) if not isinstance(v, (int, np.integer)) else str(v)
                       for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _gain_csv(gain: OutputFeedbackGain) -> str:
    header = ["row"] + [f"u{k}_{j}" for k in range(gain.n) for j in range(gain.m)] + \
             [f"y{k}_{i}" for k in range(gain.n) for i in range(gain.l)]
    return _rows_csv(header, [[r] + list(g) for r, g in enumerate(gain.gain)])


def write_outputs(out: Path, files: Dict[str, str]) -> None:
    """Write every file or none: each goes to a temp name and is renamed at the end."""
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{name}.", suffix=".tmp")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


# -- commands ---------------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig) -> Dict[str, str]:
    if cfg.T0 < 1:
        raise DataLengthError("T0 = 0 gives an empty target trajectory")
    if cfg.T1 < 2 * cfg.n:
        raise DataLengthError(f"source length T1 = {cfg.T1} is below 2n = {2 * cfg.n}")
    files = {}
    for i, spec in enumerate(cfg.targets):
        if spec.model is None:
            raise ValueError("simulate needs inline target models")
        name = "target.csv" if len(cfg.targets) == 1 else f"target_{i + 1}.csv"
        files[name] = _trajectory_csv(spec.trajectory(cfg.T0))
    for i, spec in enumerate(cfg.sources):
        if spec.model is None:
            raise ValueError("simulate needs inline source models")
        files[f"source_{i + 1}.csv"] = _trajectory_csv(spec.trajectory(cfg.T1))
    return files


def _oracle_gain(model: StateSpaceModel, cfg: ExperimentConfig) -> OutputFeedbackGain:
    ric = solve_riccati(model, CostSpec(cfg.Q, cfg.R))
    return model_output_gain(model, ric)


def _closed_loop_cost(model: StateSpaceModel, report: TransferReport, cfg: ExperimentConfig,
                      alpha) -> float:
    cost = cfg.cost
    gains = [data_driven_gain(report.reconstructed, cost, t, cfg.n, alpha=alpha)
             for t in range(cfg.horizon)]
    x0 = np.ones(model.n) if cfg.x0 is None else cfg.x0
    return evaluate_cost(run_closed_loop(model, x0, gains), cost)


def _run_transfer(cfg: ExperimentConfig, spec: SystemSpec, sources: List[ImpulseTrajectory],
                  horizon: Optional[int] = None):
    head = spec.trajectory(cfg.T0)
    return transfer_pipeline(sources, head, cfg.n, cfg.cost, horizon or cfg.horizon,
                             dedup_tol=cfg.dedup_tol)


def cmd_transfer(cfg: ExperimentConfig) -> Dict[str, str]:
    sources = [s.trajectory(cfg.T1) for s in cfg.sources]
    files = {}
    timing = {}
    for i, spec in enumerate(cfg.targets):
        start = time.perf_counter()
        gain, report = _run_transfer(cfg, spec, sources)
        doc = report.to_dict()
        doc["reconstruction_residual"] = doc.pop("fit_residual")
        if spec.model is not None:
            ref = _oracle_gain(spec.model, cfg)
            doc["gain_error"] = float(np.linalg.norm(gain.gain - ref.gain))
            grid = cfg.fig1.get("T_grid", [cfg.horizon])
            doc["gain_error_curve"] = [
                [int(T), float(np.linalg.norm(_run_transfer(cfg, spec, sources, int(T))[0].gain
                                              - ref.gain))] for T in grid]
            doc["closed_loop_cost"] = _closed_loop_cost(spec.model, report, cfg,
                                                        report.selected.alpha)
        suffix = "" if len(cfg.targets) == 1 else f"_{i + 1}"
        files[f"report{suffix}.json"] = _json(doc)
        files[f"gain{suffix}.csv"] = _gain_csv(gain)
        timing[f"target{suffix or '_1'}"] = time.perf_counter() - start
        log.info("target %d: Z = %.3e, modes = %s", i + 1, report.Z,
                 np.round(report.selected.modes.modes.real, 6))
    dictionary = report.dictionary
    files["dictionary.csv"] = _rows_csv(
        ["re", "im", "source_index"],
        [[z.real, z.imag, int(s)] for z, s in zip(dictionary.entries, dictionary.provenance)])
    files["timing.json"] = _json(timing)
    return files


def fig1_curve(cfg: ExperimentConfig) -> List[List[float]]:
    spec = cfg.targets[0]
    grid = [int(T) for T in cfg.fig1.get("T_grid", range(10, 61, 5))]
    mode = cfg.fig1.get("data", "transfer")
    reference = cfg.fig1.get("reference", "data")
    ref_horizon = int(cfg.fig1.get("reference_horizon", 4 * max(grid)))
    if mode == "exact":
        if spec.model is None:
            raise ValueError("fig1 with exact data needs an inline target model")

        def gain_at(T):
            data = impulse_response(spec.model, T + 2 * cfg.n)
            return data_driven_gain(data, cfg.cost.with_horizon(T), 0, cfg.n)
    else:
        sources = [s.trajectory(cfg.T1) for s in cfg.sources]

        def gain_at(T):
            return _run_transfer(cfg, spec, sources, T)[0]
    if reference == "model":
        if spec.model is None:
            raise ValueError("model reference needs an inline target model")
        ref = _oracle_gain(spec.model, cfg)
    else:
        ref = gain_at(ref_horizon)
    return [[T, float(np.linalg.norm(gain_at(T).gain - ref.gain))] for T in grid]


def cmd_fig1(cfg: ExperimentConfig) -> Dict[str, str]:
    return {"fig1.csv": _rows_csv(["T", "error"], fig1_curve(cfg))}


def fig2_rows(cfg: ExperimentConfig) -> List[List[float]]:
    if "scales" in cfg.fig2:
        base = cfg.targets[0].model
        if base is None:
            raise ValueError("perturbed fig2 targets need an inline base model")
        rng = np.random.default_rng(cfg.seed)
        targets = [SystemSpec(model=m) for m in perturbed_targets(
            base, cfg.fig2["scales"], rng, cfg.fig2.get("perturb", "modes"))]
    else:
        targets = cfg.targets
    if len(targets) < 2:
        raise ValueError("fig2 needs at least two targets")
    sources = [s.trajectory(cfg.T1) for s in cfg.sources]
    rows = []
    for spec in targets:
        if spec.model is None:
            raise ValueError("fig2 needs target models for the reference gain")
        gain, report = _run_transfer(cfg, spec, sources)
        rows.append([report.Z, float(np.linalg.norm(gain.gain - _oracle_gain(spec.model, cfg).gain))])
    return rows


def cmd_fig2(cfg: ExperimentConfig) -> Dict[str, str]:
    rows = fig2_rows(cfg)
    Z, err = np.array(rows).T
    rho = spearmanr(Z, err).statistic if np.ptp(Z) > 0 and np.ptp(err) > 0 else float("nan")
    return {"fig2.csv": _rows_csv(["Z", "error"], rows),
            "fig2.json": _json({"spearman": float(rho), "targets": len(rows)})}


COMMANDS = {"simulate": cmd_simulate, "transfer": cmd_transfer, "fig1": cmd_fig1,
            "fig2": cmd_fig2}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, SampleComplexityError):
        return EXIT_SAMPLES
    if isinstance(exc, (RankError, ValidationError)):
        return EXIT_RANK
    return EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lqrtransfer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--verbose", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        files = COMMANDS[args.command](cfg)
        write_outputs(cfg.out, files)
    except (LQRTransferError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    for name in files:
        log.info("wrote %s", cfg.out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
