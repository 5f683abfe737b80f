"""Print headline numbers from CSVs written by run_presets.py.

    python scripts/summarize.py results
"""
import sys
from pathlib import Path

import numpy as np

from repint.cli import read_csv


def final_work(path):
    """Last cumulative-work value for every combination of sweep parameters."""
    _, cols = read_csv(path)
    params = [k for k in cols if "." in k]
    keys = list(zip(*(cols[p] for p in params)))
    last = {}
    for i, key in enumerate(keys):
        last[key] = cols["work"][i]
    return params, last


def anisotropy_fractions(path):
    _, cols = read_csv(path)
    ratio, jz = cols["interaction.gy_over_gx"], cols["Jz"]
    pos = ratio > 0
    return {"thermal (Jz<0) for gy>0": float(np.mean(jz[pos] < 0)),
            "inverted (Jz>0) for gy<0": float(np.mean(jz[~pos & (ratio < 0)] > 0))}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    root = Path(argv[0] if argv else "results")
    for name in ("fig5", "fig7_work"):
        path = root / f"{name}.csv"
        if not path.exists():
            continue
        params, last = final_work(path)
        print(f"{name}: final work by {', '.join(params)}")
        for key, w in last.items():
            print("   ", ", ".join(f"{v:g}" for v in key), f"-> {w:.6g}")
    path = root / "fig2.csv"
    if path.exists():
        for label, frac in anisotropy_fractions(path).items():
            print(f"fig2: {label}: {frac:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
