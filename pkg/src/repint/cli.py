"""Command-line experiment runner writing self-describing CSV files."""
from __future__ import annotations

import argparse
import csv
import datetime
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (
    MODES, ConfigError, build_from_tree, check_param, load_config, load_preset, preset_names,
    set_param, sweep_points, tree_at,
)
from .errors import InvalidStateError, NoRelaxationError, NumericalError
from .master import ensemble_liouvillian, steady_state
from .model import initial_state
from .montecarlo import simulate
from .scattering import KINDS
from .thermo import cumulative_work, effective_beta, is_passive, observable_value, work_power


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class CsvTable:
    """Ordered rows plus '#' metadata, rendered deterministically."""

    def __init__(self, meta: list[str]):
        self.meta = meta
        self.header: list[str] | None = None
        self.rows: list[list] = []

    def add(self, row: dict):
        if self.header is None:
            self.header = list(row)
        elif list(row) != self.header:
            raise NumericalError("inconsistent CSV columns between rows")
        self.rows.append([row[k] for k in self.header])

    def render(self) -> str:
        lines = [f"# {m}" for m in self.meta]
        lines.append(",".join(self.header or []))
        lines += [",".join(_fmt(v) for v in r) for r in self.rows]
        return "\n".join(lines) + "\n"


def read_csv(path_or_text):
    """Parse an output file (path, or CSV text) into (metadata lines, {column: array or list of str})."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text) as fh:
            text = fh.read()
    lines = text.splitlines()
    meta = [ln[2:] for ln in lines if ln.startswith("#")]
    body = list(csv.reader(ln for ln in lines if ln and not ln.startswith("#")))
    header, rows = body[0], body[1:]
    cols = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(x) for x in raw])
        except ValueError:
            cols[name] = raw
    return meta, cols


def population_ratio(rho, H_s) -> float:
    """p(highest level) / p(next level down) in the energy eigenbasis."""
    w, V = np.linalg.eigh(H_s)
    p = np.diag(V.conj().T @ rho @ V).real
    return float(p[-1] / p[-2]) if p[-2] > 0 else math.inf


def steady_row(model, kind: str) -> dict:
    L = ensemble_liouvillian(model, kind)
    ss = steady_state(L)
    rho = ss.rho
    row = {name: observable_value(rho, A) for name, A in model.observables.items()}
    row["chi"] = population_ratio(rho, model.H_s)
    try:
        eff = effective_beta(rho, model.H_s)
        row["beta_eff"], row["beta_flag"] = eff.beta, eff.flag
    except ValueError:
        row["beta_eff"], row["beta_flag"] = math.nan, "coherent"
    row["passive"] = is_passive(rho, model.H_s)
    row["degeneracy"] = ss.degeneracy
    row["work_power"] = work_power(model, rho, kind)
    return row


def _times(cfg):
    if not cfg.run.times:
        raise ConfigError(f"{cfg.source}: [run] needs t_max (or times) for time-series modes")
    return np.asarray(cfg.run.times)


def _evolve_rows(cfg, model, point):
    t = _times(cfg)
    rho0 = initial_state(model, cfg.run.initial)
    series = cumulative_work(model, rho0, t, cfg.run.kind, cfg.run.method)
    for i, ti in enumerate(series.times):
        yield {**point, "t": ti, **{k: v[i] for k, v in series.values.items()}}


def _mc_rows(cfg, model, point, threads):
    t = _times(cfg)
    rho0 = initial_state(model, cfg.run.initial)
    ens = simulate(model, rho0, t, cfg.run.n_trajectories, cfg.run.seed, cfg.run.kind, threads,
                   cfg.run.convention, cfg.run.recording)
    for i, ti in enumerate(t):
        row = {**point, "t": ti}
        for name in ens.mean:
            row[name] = ens.mean[name][i]
            row[f"{name}_stderr"] = ens.stderr[name][i]
        row["N"] = ens.N
        yield row


def _compare_rows(cfg, model, point, threads):
    from .montecarlo import compare_kinds
    t = _times(cfg)
    rho0 = initial_state(model, cfg.run.initial)
    rep = compare_kinds(model, rho0, t, cfg.run.n_trajectories, cfg.run.seed, threads,
                        method=cfg.run.method)
    for kind in KINDS:
        for i, ti in enumerate(t):
            row = {**point, "kind": kind, "t": ti}
            for name in rep.curves[kind]:
                me, mc, err = rep.curves[kind][name][i], rep.oracle.mean[name][i], rep.oracle.stderr[name][i]
                row[f"{name}_me"], row[f"{name}_mc"], row[f"{name}_stderr"] = me, mc, err
                row[f"{name}_z"] = abs(me - mc) / err if err > 0 else (0.0 if me == mc else math.inf)
            yield row


def run_config(cfg, mode: str | None = None, threads: int | None = None,
               reproducible: bool = False, argv: list[str] | None = None) -> str:
    """Execute a configuration and return the CSV text."""
    mode = mode or cfg.run.mode
    if mode not in MODES:
        raise ConfigError(f"{cfg.source}: no run mode given (use a subcommand or [run] mode)")
    if mode == "sweep" and not cfg.sweep:
        raise ConfigError(f"{cfg.source}: sweep mode needs at least one [[sweep]] axis")
    threads = cfg.run.threads if threads is None else threads
    meta = [f"repint {__version__}", f"mode: {mode}", f"seed: {cfg.run.seed}",
            f"source: {cfg.source}"]
    if not reproducible:
        meta.append(f"timestamp: {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
    if argv:
        meta.append("overrides: " + " ".join(argv))
    meta += [f"config: {line}" for line in cfg.text.splitlines()]
    table = CsvTable(meta)
    points = sweep_points(cfg)

    def model_at(point):
        return build_from_tree(tree_at(cfg, point), cfg.source)

    if mode in ("steady", "sweep"):
        models = [model_at(p) for p in points]

        def one(i):
            return steady_row(models[i], cfg.run.kind)

        # grid points are independent; rows are written in grid order
        if threads > 1 and len(points) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(one, range(len(points))))
        else:
            rows = [one(i) for i in range(len(points))]
        for p, r in zip(points, rows):
            table.add({**p, **r})
        return table.render()

    for p in points:
        model = model_at(p)
        if mode == "evolve":
            gen = _evolve_rows(cfg, model, p)
        elif mode == "montecarlo":
            gen = _mc_rows(cfg, model, p, threads)
        else:
            gen = _compare_rows(cfg, model, p, threads)
        for row in gen:
            table.add(row)
    return table.render()


def _apply_sets(cfg, assignments):
    tree = cfg.tree
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        check_param(key, "--set")
        try:
            value = float(raw)
        except ValueError:
            value = raw
        tree = set_param(tree, key, value)
    build_from_tree(tree, cfg.source)
    return replace(cfg, tree=tree)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="repint", description=__doc__)
    ap.add_argument("--version", action="version", version=f"repint {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} mode")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="PATH", help="TOML experiment file")
        src.add_argument("--preset", metavar="NAME", help="bundled experiment (see 'presets')")
        p.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--n-trajectories", type=int, help="override [run] n_trajectories")
        p.add_argument("--reproducible", action="store_true", help="omit the timestamp line")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a model parameter (repeatable)")
    sub.add_parser("presets", help="list bundled experiments")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return 0
    try:
        cfg = load_config(args.config) if args.config else load_preset(args.preset)
        if args.set:
            cfg = _apply_sets(cfg, args.set)
        changes = {}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            changes["seed"] = args.seed
        if args.n_trajectories is not None:
            if args.n_trajectories < 1:
                raise ConfigError("--n-trajectories must be positive")
            changes["n_trajectories"] = args.n_trajectories
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        if changes:
            cfg = replace(cfg, run=replace(cfg.run, **changes))
        overrides = [f"--set {s}" for s in args.set] + [f"--{k.replace('_', '-')} {v}"
                                                         for k, v in changes.items()]
        text = run_config(cfg, args.command, args.threads, args.reproducible, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, InvalidStateError, NoRelaxationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    warnings.simplefilter("default")
    sys.exit(main())
