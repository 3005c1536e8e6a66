#!/usr/bin/env python3
"""Real-time loop benchmark: runs the synchronized loop and renders the
per-step calculation/loop-time figure plus a text summary.

Usage: python scripts/timing_report.py [--model ieee39] [--seconds 60]
       [--dt 0.005] [--out-dir out/timing]
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

from dynrms import data, engine, network, plots
from dynrms.engine import SimulationConfig
from dynrms.realtime import RealtimeSession


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="ieee39")
    ap.add_argument("--seconds", type=float, default=60.0)
    ap.add_argument("--dt", type=float, default=0.005)
    ap.add_argument("--method", default="modified_euler")
    ap.add_argument("--out-dir", type=Path, default=Path("out/timing"))
    args = ap.parse_args()

    sysd = data.load_model(data.fixture_path(args.model)
                           if not Path(args.model).is_file() else args.model)
    pf = network.solve_power_flow(sysd)
    config = SimulationConfig(dt=args.dt, method=args.method)
    sysm = engine.build(sysd, pf, config)
    x0 = sysm.initialize()

    print(f"running {args.seconds:.0f} s of simulated time in real time "
          f"({sysm.allocation.total} states, dt={args.dt * 1e3:.0f} ms)...")
    session = RealtimeSession(sysm, x0, config, t_end=args.seconds)
    stats = session.run()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    plots.save_figure(plots.timing_figure(stats), args.out_dir / "timing.png")
    (args.out_dir / "summary.txt").write_text(stats.summary() + "\n")
    print(stats.summary())


if __name__ == "__main__":
    main()
