"""Run bundled experiments and write one CSV per preset.

    python scripts/run_presets.py --out results            # all presets
    python scripts/run_presets.py fig2 fig5 --threads 8
"""
import argparse
import sys
import time
from pathlib import Path

from repint.cli import main as repint_main
from repint.config import load_preset, preset_names


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("presets", nargs="*", help="preset names (default: all)")
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args(argv)

    names = args.presets or preset_names()
    unknown = sorted(set(names) - set(preset_names()))
    if unknown:
        ap.error(f"unknown presets: {', '.join(unknown)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = []
    for name in names:
        mode = load_preset(name).run.mode
        dest = out / f"{name}.csv"
        start = time.perf_counter()
        code = repint_main([mode, "--preset", name, "--threads", str(args.threads),
                            "--reproducible", "--out", str(dest)])
        status = "ok" if code == 0 else f"exit {code}"
        print(f"{name:16s} {mode:10s} {time.perf_counter() - start:7.1f}s  {status}  {dest}")
        if code:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
