"""Period lattices of the anisotropic oscillator at several levels.

Periods do not depend on the level for linear oscillators, so the rows should
all report (2 pi, 0) and (0, 2 pi / sqrt 2)."""
from __future__ import annotations

import argparse
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from closedforms.cli import data_path
from closedforms.geomech import load_system
from closedforms.torus import LatticeSearch, fiber_verdict


@dataclass
class ScanConfig:
    system: str = "anisotropic_oscillator"
    levels: list[list[float]] = field(default_factory=lambda: [[0.5, 0.5], [0.2, 0.8], [1.0, 0.3]])
    t_max: float = 20.0
    grid: int = 64
    seed: int = 0


def run(cfg: ScanConfig) -> list[dict]:
    sys = load_system(data_path("systems", f"{cfg.system}.json"), cfg.system)
    rows = []
    for c in cfg.levels:
        guess = [math.sqrt(2 * c[0]), 0.0, 0.0, math.sqrt(c[1])]
        fv = fiber_verdict(sys, c, [guess], LatticeSearch(t_max=cfg.t_max, grid=cfg.grid), seed=cfg.seed)
        basis = [] if fv.lattice is None else np.round(np.array(fv.lattice.basis), 10).tolist()
        rows.append({"level": c, "verdict": fv.verdict, "basis": basis})
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--system", default=ScanConfig.system)
    ap.add_argument("--tmax", type=float, default=ScanConfig.t_max)
    args = ap.parse_args()
    cfg = ScanConfig(system=args.system, t_max=args.tmax)
    print(json.dumps({"config": asdict(cfg), "rows": run(cfg)}, indent=2))
