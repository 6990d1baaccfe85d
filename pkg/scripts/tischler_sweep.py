"""Sweep the irrational slope of beta_1 = dx + a*dy and record what the
rationalisation produces (convergent, N, covering degree) on a flat torus."""
from __future__ import annotations

import argparse
import json
import math
from dataclasses import asdict, dataclass, field

from closedforms import pipeline
from closedforms.mesh import coordinate_form, flat_torus


@dataclass
class SweepConfig:
    res: int = 32
    slopes: list[float] = field(default_factory=lambda: [0.25, 0.3, 1 / 3, math.sqrt(2) - 1, 0.1])
    eps: float = 1e-2
    bins: int = 16


def run(cfg: SweepConfig) -> list[dict]:
    K = flat_torus(cfg.res)
    dx, dy = coordinate_form(K, 0), coordinate_form(K, 1)
    rows = []
    for a in cfg.slopes:
        rep, code = pipeline.run_fibrate(K, [dx + a * dy, dy], cfg.eps, cfg.bins)
        rows.append({"slope": a, "exit": code, "verdict": rep["verdict"],
                     "k": rep.get("integer_coefficients"), "eps_used": rep.get("eps_used"),
                     "summary": rep.get("summary")})
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--res", type=int, default=SweepConfig.res)
    ap.add_argument("--eps", type=float, default=SweepConfig.eps)
    args = ap.parse_args()
    cfg = SweepConfig(res=args.res, eps=args.eps)
    print(json.dumps({"config": asdict(cfg), "rows": run(cfg)}, indent=2))
