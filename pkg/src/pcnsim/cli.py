"""Experiment matrix runner.

A config file is flat ``key = value`` text; list-valued keys take comma
separated values. The matrix is the cross product of fee policies, routers,
the ``d``/``k`` grid (cells with ``k > d`` are skipped) and the scenario axes
``x_tx``, ``balance_dist`` and ``tx_dist``.

Outputs in ``--out``:

* ``results.csv`` (or ``results.json``): one row per cell
* ``results_windows.csv``: windowed success, long format
* ``fig1_success.csv``, ``fig3_windows.csv``, ``fig4_messages.csv``: figure-shaped slices
* ``summary.json``: all of the above plus per-run values and a metadata block
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ROUTERS, BatchResult, RunConfig, run_batch
from .fees import POLICY_CODES, FeePolicy
from .workload import BalanceSpec, TopologySpec, TransactionSpec

log = logging.getLogger("pcnsim")

RESULT_COLUMNS = ["experiment_id", "fee_policy", "router", "d", "k", "x_tx", "balance_dist",
                  "tx_dist", "mean_success", "stddev_success", "mean_messages"]
WINDOW_COLUMNS = ["experiment_id", "window", "mean_success", "stddev_success"]


class ConfigError(ValueError):
    pass


def _list(cast):
    def parse(text):
        items = [t.strip() for t in str(text).split(",") if t.strip()]
        if not items:
            raise ValueError("empty list")
        return [cast(t) for t in items]
    return parse


def _range_or_list(text):
    """``1,2,5`` or ``1..10``."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = (int(t) for t in text.split("..", 1))
        if hi < lo:
            raise ValueError(f"empty range {text}")
        return list(range(lo, hi + 1))
    return _list(int)(text)


@dataclass
class ExperimentMatrix:
    fee_policies: list[str] = field(default_factory=lambda: list(POLICY_CODES))
    routers: list[str] = field(default_factory=lambda: ["multipath"])
    d: list[int] = field(default_factory=lambda: [10])
    k: list[int] = field(default_factory=lambda: [1])
    x_tx: list[float] = field(default_factory=lambda: [0.05])
    balance_dist: list[str] = field(default_factory=lambda: ["exponential"])
    tx_dist: list[str] = field(default_factory=lambda: ["exponential"])
    repetitions: int = 5
    seed: int = 0
    out: str = "results"
    format: str = "csv"
    jobs: int = 1
    topology: str = "barabasi_albert"
    node_count: int = 1000
    attach_count: int = 5
    snapshot_path: str = ""
    init: float = 2.4e6
    tx_count: int = 20000
    window_size: int = 1000
    normal_sd_ratio: float = 0.25
    base_fee: float = 1.0
    rate: float = 1e-6
    rate_low: float = 0.01
    rate_high: float = 0.03
    factor: float = 1.0

    PARSERS = {
        "fee_policies": _list(str), "routers": _list(str), "d": _range_or_list,
        "k": _range_or_list, "x_tx": _list(float), "balance_dist": _list(str),
        "tx_dist": _list(str), "repetitions": int, "seed": int, "out": str, "format": str,
        "jobs": int, "topology": str, "node_count": int, "attach_count": int,
        "snapshot_path": str, "init": float, "tx_count": int, "window_size": int,
        "normal_sd_ratio": float, "base_fee": float, "rate": float, "rate_low": float,
        "rate_high": float, "factor": float,
    }

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "ExperimentMatrix":
        kwargs = {}
        for key, raw in values.items():
            if key not in cls.PARSERS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                kwargs[key] = cls.PARSERS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from None
        matrix = cls(**kwargs)
        matrix.validate()
        return matrix

    def validate(self):
        for p in self.fee_policies:
            if p not in POLICY_CODES:
                raise ConfigError(f"unknown fee policy {p!r}")
        for r in self.routers:
            if r not in ROUTERS:
                raise ConfigError(f"unknown router {r!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.repetitions < 1 or self.jobs < 1:
            raise ConfigError("repetitions and jobs must be >= 1")
        if min(self.d) < 1 or min(self.k) < 1:
            raise ConfigError("d and k must be >= 1")
        if "multipath" in self.routers and not self.grid():
            raise ConfigError("no (d, k) pair with k <= d")
        try:
            self.cells()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def grid(self) -> list[tuple[int, int]]:
        return [(d, k) for d in self.d for k in self.k if k <= d]

    def scenarios(self) -> list[tuple[float, str, str]]:
        return list(itertools.product(self.x_tx, self.balance_dist, self.tx_dist))

    def cells(self) -> list[tuple[str, tuple[float, str, str], RunConfig]]:
        topo = TopologySpec(self.topology, self.node_count, self.attach_count,
                            self.snapshot_path or None)
        out = []
        for scenario in self.scenarios():
            x, bal, txd = scenario
            balances = BalanceSpec(bal, self.init, self.normal_sd_ratio)
            txs = TransactionSpec(self.tx_count, txd, x, self.normal_sd_ratio)
            for policy_name in self.fee_policies:
                policy = FeePolicy(policy_name, self.base_fee, self.rate, self.rate_low,
                                   self.rate_high, self.factor)
                for router in self.routers:
                    grid = self.grid() if router == "multipath" else [(0, 0)]
                    for d, k in grid:
                        cfg = RunConfig(router, max(d, 1), max(k, 1), policy, topo, balances, txs,
                                        self.seed, self.window_size)
                        out.append((experiment_id(policy_name, router, d, k, scenario), scenario, cfg))
        return out

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def scenario_tag(scenario) -> str:
    x, bal, txd = scenario
    return f"x{fmt(x)}-{bal}-{txd}"


def experiment_id(policy, router, d, k, scenario) -> str:
    dk = f"-d{d}-k{k}" if router == "multipath" else ""
    return f"{policy}-{router}{dk}-{scenario_tag(scenario)}"


def parse_config(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        values[key] = value
    return values


def fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


# ---------------------------------------------------------------------------
# result emission


@dataclass
class CellResult:
    experiment_id: str
    scenario: tuple[float, str, str]
    batch: BatchResult

    @property
    def config(self) -> RunConfig:
        return self.batch.config

    def row(self) -> dict:
        cfg = self.config
        mp = cfg.router == "multipath"
        mean, std = self.batch.success
        x, bal, txd = self.scenario
        return {
            "experiment_id": self.experiment_id, "fee_policy": cfg.policy.kind,
            "router": cfg.router, "d": cfg.d if mp else "", "k": cfg.k if mp else "",
            "x_tx": x, "balance_dist": bal, "tx_dist": txd, "mean_success": mean,
            "stddev_success": std, "mean_messages": self.batch.messages[0],
        }


def _write_csv(path: Path, columns: list[str], rows: list[dict]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])


def _round_json(value):
    # serialise floats at the CSV precision so both files agree
    if isinstance(value, float):
        return float(fmt(value))
    if isinstance(value, dict):
        return {k: _round_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_json(v) for v in value]
    return value


def emit_results(results: list[CellResult], fmt_name: str, path: str | Path) -> list[Path]:
    """Write the per-cell table at ``path`` plus a long-format windows companion."""
    path = Path(path)
    rows = [r.row() for r in results]
    if fmt_name == "csv":
        _write_csv(path, RESULT_COLUMNS, rows)
    elif fmt_name == "json":
        path.write_text(json.dumps(_round_json(rows), indent=2) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt_name!r}")
    windows = [{"experiment_id": r.experiment_id, "window": i, "mean_success": m,
                "stddev_success": s}
               for r in results for i, (m, s) in enumerate(r.batch.windowed)]
    companion = path.with_name(path.stem + "_windows.csv")
    _write_csv(companion, WINDOW_COLUMNS, windows)
    return [path, companion]


def _figure_tables(results: list[CellResult], matrix: ExperimentMatrix, out: Path) -> list[Path]:
    written = []
    scenarios = matrix.scenarios()
    multi = len(scenarios) > 1
    for scenario in scenarios:
        suffix = f"_{scenario_tag(scenario)}" if multi else ""
        cells = [r for r in results if r.scenario == scenario and r.config.router == "multipath"]
        if not cells:
            continue
        d_max = max(r.config.d for r in cells)
        fig1 = [{"fee_policy": r.config.policy.kind, "k": r.config.k,
                 "mean_success": r.batch.success[0], "stddev": r.batch.success[1]}
                for r in cells if r.config.d == d_max]
        fig3 = [{"fee_policy": r.config.policy.kind, "d": r.config.d, "k": r.config.k,
                 "window": i, "mean_success": m, "stddev": s}
                for r in cells for i, (m, s) in enumerate(r.batch.windowed)]
        fig4 = [{"fee_policy": r.config.policy.kind, "d": r.config.d, "k": r.config.k,
                 "mean_messages": r.batch.messages[0], "stddev": r.batch.messages[1]}
                for r in cells]
        for name, columns, rows in (
                ("fig1_success", ["fee_policy", "k", "mean_success", "stddev"], fig1),
                ("fig3_windows", ["fee_policy", "d", "k", "window", "mean_success", "stddev"], fig3),
                ("fig4_messages", ["fee_policy", "d", "k", "mean_messages", "stddev"], fig4)):
            p = out / f"{name}{suffix}.csv"
            _write_csv(p, columns, rows)
            written.append(p)
    return written


def _summary(results: list[CellResult], matrix: ExperimentMatrix, started: float) -> dict:
    cells = []
    for r in results:
        entry = r.row()
        entry["runs"] = [{"seed": run.seed, "success_ratio": run.success_ratio,
                          "mean_messages_success": run.mean_messages_success,
                          "outcome_counts": run.outcome_counts,
                          "capacity_drift": run.capacity_drift} for run in r.batch.runs]
        entry["windowed"] = [{"mean_success": m, "stddev_success": s} for m, s in r.batch.windowed]
        cells.append(entry)
    settings = matrix.as_dict()
    # where the files went is not part of the result
    out = settings.pop("out")
    return {
        "matrix": settings,
        "results": _round_json(cells),
        "metadata": {"out": out, "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
                     "elapsed_seconds": round(time.time() - started, 3)},
    }


def print_table(results: list[CellResult], stream=sys.stdout):
    header = f"{'experiment':<58} {'success':>9} {'stddev':>8} {'messages':>9}"
    print(header, file=stream)
    print("-" * len(header), file=stream)
    for r in results:
        row = r.row()
        print(f"{row['experiment_id']:<58} {row['mean_success']:>9.4f} "
              f"{row['stddev_success']:>8.4f} {row['mean_messages']:>9.2f}", file=stream)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcnsim", description="Run a payment channel routing experiment matrix.")
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--repetitions", type=int)
    p.add_argument("--jobs", type=int, help="worker processes for independent runs")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--validate-only", action="store_true",
                   help="print the expanded matrix and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_matrix(args) -> ExperimentMatrix:
    values = {}
    if args.config is not None:
        values.update(parse_config(args.config.read_text(encoding="utf-8")))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    for key in ("seed", "out", "format", "repetitions", "jobs"):
        if getattr(args, key) is not None:
            values[key] = str(getattr(args, key))
    return ExperimentMatrix.from_mapping(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        matrix = load_matrix(args)
    except (ConfigError, OSError) as exc:
        print(f"pcnsim: config error: {exc}", file=sys.stderr)
        return 2
    cells = matrix.cells()

    if args.validate_only:
        print(json.dumps(matrix.as_dict(), indent=2))
        print(f"{len(cells)} cell(s) x {matrix.repetitions} repetition(s):")
        for exp_id, _, _ in cells:
            print(f"  {exp_id}")
        return 0

    out = Path(matrix.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"pcnsim: cannot create output directory: {exc}", file=sys.stderr)
        return 1

    started = time.time()
    try:
        batches = run_batch([cfg for _, _, cfg in cells], matrix.repetitions, jobs=matrix.jobs)
    except (ValueError, OSError) as exc:
        print(f"pcnsim: run failed: {exc}", file=sys.stderr)
        return 1
    results = [CellResult(exp_id, scenario, b) for (exp_id, scenario, _), b in zip(cells, batches)]

    try:
        emit_results(results, matrix.format, out / f"results.{matrix.format}")
        if matrix.format == "csv":
            _figure_tables(results, matrix, out)
        (out / "summary.json").write_text(
            json.dumps(_summary(results, matrix, started), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"pcnsim: cannot write results: {exc}", file=sys.stderr)
        return 1
    print_table(results)
    return 0
