#!/usr/bin/env python3
"""Plot tracking traces for one evaluation seed from plotdata_<seed>/ CSVs.

Produces a 3x2 grid (rows: joint position vs reference, absolute tracking
error in degrees, commanded torque; columns: joints) with one line per
controller, and saves it as a PNG.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np


def load_joint_csv(path: Path) -> dict:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {key: np.array([float(r[key]) for r in rows])
            for key in rows[0].keys()}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--results", default="results",
                        help="experiment output directory")
    parser.add_argument("--seed", type=int, default=0, help="evaluation seed")
    parser.add_argument("--out", default=None,
                        help="output PNG path (default tracking_<seed>.png)")
    args = parser.parse_args(argv)

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plot_tracking: matplotlib is not installed; "
              "pip install matplotlib", file=sys.stderr)
        return 1

    plot_dir = Path(args.results) / f"plotdata_{args.seed}"
    if not plot_dir.is_dir():
        print(f"plot_tracking: {plot_dir} not found; run the experiment first",
              file=sys.stderr)
        return 1
    controllers = sorted({p.name.rsplit("_joint", 1)[0]
                          for p in plot_dir.glob("*_joint1.csv")})
    if not controllers:
        print(f"plot_tracking: no plotdata CSVs under {plot_dir}", file=sys.stderr)
        return 1

    fig, axes = plt.subplots(3, 2, figsize=(11, 9), sharex=True)
    for j in (0, 1):
        ref_drawn = False
        for controller in controllers:
            data = load_joint_csv(plot_dir / f"{controller}_joint{j + 1}.csv")
            if not ref_drawn:
                axes[0, j].plot(data["t"], data["qd_rad"], "k--", lw=1.0,
                                label="reference")
                ref_drawn = True
            axes[0, j].plot(data["t"], data["q_rad"], lw=0.9, label=controller)
            axes[1, j].semilogy(data["t"], np.maximum(data["abs_err_deg"], 1e-6),
                                lw=0.9, label=controller)
            axes[2, j].plot(data["t"], data["tau_Nm"], lw=0.9, label=controller)
        axes[0, j].set_title(f"joint {j + 1}")
        axes[2, j].set_xlabel("t [s]")
    axes[0, 0].set_ylabel("q [rad]")
    axes[1, 0].set_ylabel("|error| [deg]")
    axes[2, 0].set_ylabel("tau [Nm]")
    axes[0, 0].legend(fontsize=8, ncol=2)
    fig.suptitle(f"tracking, seed {args.seed}")
    fig.tight_layout()

    out = args.out if args.out else f"tracking_{args.seed}.png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
