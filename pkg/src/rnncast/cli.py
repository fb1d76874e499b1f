"""Command-line front end.

Settings resolve in order: RunConfig defaults, ``--profile``, ``--config``
file, explicit flags. Every command writes its artifacts plus
``run_manifest.json`` under ``--out``; ``rnncast replay <manifest>`` re-runs
it.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, _jit
from .core import ARCHITECTURES, ModelConfig, RecurrentModel, StructureError
from .data import (DataError, SplitSpec, fit_scaler, load_active, load_simple_csv, make_windows,
                   parse_date, split_by_date, transform, write_active_csv)
from .evaluation import (EvaluationReport, RegionFailure, approach_table, compare_architectures,
                         evaluate_one_step, first_test_date, ordered_map, run_approach1, run_approach2,
                         target_scaler, train_native, write_approach_table)
from .explain import (ANALYSIS_WINDOWS, capture_trace, compare_envelopes, export_heatmap,
                      extract_envelope)
from .forecast import INDIA_HORIZON, evaluate_then_forecast
from .training import NumericError, train

log = logging.getLogger("rnncast")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("ingest", "train", "evaluate", "compare", "transfer", "explain", "forecast")


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = list(problems) if isinstance(problems, (list, tuple)) else [problems]
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    data: str | None = None
    series: str | None = None
    label: str | None = None
    region: str | None = None
    regions: list | None = None
    all_regions: bool = False
    model: str | None = None
    architecture: str = "LSTM"
    hidden_units: list = field(default_factory=lambda: [150])
    window_size: int = 8
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.001
    validation_fraction: float = 0.10
    shuffle: bool = False
    clip_norm: float | None = None
    seed: int = 0
    train_end: str = "2020-12-27"
    test_start: str | None = None
    horizon: int | None = None
    late_start_train_days: int | None = None
    scaler_policy: str = "auto"
    native: bool = False
    absolute: bool = False
    analysis_windows: dict = field(default_factory=dict)
    presets: list | None = None
    cell_px: int = 2
    out: str = "runs"
    jobs: int = 1
    profile: str | None = None

    def model_config(self):
        return ModelConfig(self.architecture, tuple(self.hidden_units), self.window_size,
                           self.seed, self.epochs, self.validation_fraction,
                           self.learning_rate, self.batch_size, shuffle=self.shuffle,
                           clip_norm=self.clip_norm)

    def split(self):
        return SplitSpec(parse_date(self.train_end), self.validation_fraction)


_PAPER_BASE = {"region": "Maharashtra", "train_end": "2020-12-27", "architecture": "LSTM",
               "hidden_units": [150], "window_size": 8, "epochs": 100}

PROFILES = {
    # architecture sweep and the pretrained source model
    "paper-maharashtra": dict(_PAPER_BASE),
    # transfer vs native on every region, plus explain windows
    "paper-transfer": dict(_PAPER_BASE, all_regions=True, native=True,
                           late_start_train_days=300,
                           analysis_windows={k: list(v) for k, v in ANALYSIS_WINDOWS.items()}),
    # national series: test 2021-02-09..2021-12-15, forecast 2021-12-16..2022-03-05
    "paper-india-forecast": dict(_PAPER_BASE, region=None, label="India",
                                 test_start="2021-02-09", horizon=INDIA_HORIZON,
                                 scaler_policy="target-full"),
}

_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([message])


def _common(p):
    g = p.add_argument_group("global")
    g.add_argument("--config", help="JSON config file or a previous run_manifest.json")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--jobs", type=int, help="parallel regions/presets")
    g.add_argument("--profile", choices=sorted(PROFILES))
    g.add_argument("-v", "--verbose", action="store_true")


def _data_flags(p, region_many=False):
    p.add_argument("--data", help="CSV with date,region,confirmed,deaths,recovered")
    p.add_argument("--series", help="CSV with date,active (single series)")
    p.add_argument("--label", help="name for a --series file")
    if region_many:
        p.add_argument("--region", dest="regions", action="append", help="repeatable")
        p.add_argument("--all-regions", action="store_true", default=None)
    else:
        p.add_argument("--region")


def _model_flags(p):
    p.add_argument("--architecture", choices=ARCHITECTURES)
    p.add_argument("--hidden-units", type=int, nargs="+")
    p.add_argument("--window-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--shuffle", action="store_true", default=None)
    p.add_argument("--clip-norm", type=float)


def build_parser():
    parser = _Parser(prog="rnncast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="derive per-region active-case CSVs")
    _data_flags(p, region_many=True)
    _common(p)

    p = sub.add_parser("train", help="train on a region's training split")
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--train-end")
    _common(p)

    p = sub.add_parser("evaluate", help="one-step-ahead test evaluation")
    _data_flags(p)
    p.add_argument("--model")
    p.add_argument("--train-end")
    p.add_argument("--test-start")
    p.add_argument("--scaler-policy", choices=("auto", "source", "target-full", "target-train"))
    _common(p)

    p = sub.add_parser("compare", help="architecture sweep ranked by test MAE")
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--train-end")
    _common(p)

    p = sub.add_parser("transfer", help="pretrained model on many regions")
    _data_flags(p, region_many=True)
    _model_flags(p)
    p.add_argument("--model")
    p.add_argument("--train-end")
    p.add_argument("--native", action="store_true", default=None,
                   help="also train and test each region on its own data")
    p.add_argument("--late-start-train-days", type=int)
    p.add_argument("--scaler-policy", choices=("auto", "source", "target-full", "target-train"))
    _common(p)

    p = sub.add_parser("explain", help="hidden-state heatmaps and envelopes")
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--model")
    p.add_argument("--train-end")
    p.add_argument("--native", action="store_true", default=None,
                   help="also train a native model and compare envelopes")
    p.add_argument("--late-start-train-days", type=int)
    p.add_argument("--absolute", action="store_true", default=None)
    p.add_argument("--day-range", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--cell-px", type=int)
    p.add_argument("--scaler-policy", choices=("auto", "source", "target-full", "target-train"))
    _common(p)

    p = sub.add_parser("forecast", help="evaluate then forecast recursively")
    _data_flags(p)
    p.add_argument("--model")
    p.add_argument("--test-start")
    p.add_argument("--horizon", type=int)
    p.add_argument("--scaler-policy", choices=("auto", "source", "target-full", "target-train"))
    _common(p)

    p = sub.add_parser("replay", help="re-run a run_manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", help="write to this directory instead")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _read_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config file {path} is not valid JSON: {exc}"]) from None
    if "config" in d and "command" in d:  # a run manifest
        d = d["config"]
    unknown = sorted(set(d) - _FIELDS)
    if unknown:
        raise ConfigError([f"unknown config keys in {path}: {', '.join(unknown)}"])
    return d


def resolve_config(args):
    values = {}
    if getattr(args, "profile", None):
        values.update(PROFILES[args.profile])
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))
    for k, v in vars(args).items():
        if k in _FIELDS and v is not None:
            values[k] = v
    if getattr(args, "day_range", None) and values.get("region"):
        windows = dict(values.get("analysis_windows") or {})
        windows[values["region"]] = list(args.day_range)
        values["analysis_windows"] = windows
    return RunConfig(**values)


def validate(command, cfg):
    """Every problem with ``cfg`` for ``command``, as a list of messages."""
    problems = []

    def need(name, why=""):
        if getattr(cfg, name) in (None, [], ""):
            problems.append(f"{command}: --{name.replace('_', '-')} is required{why}")

    def exists(name):
        path = getattr(cfg, name)
        if path and not Path(path).is_file():
            problems.append(f"{name} file not found: {path}")

    if command in ("ingest", "compare", "transfer", "explain"):
        need("data")
    elif command in ("train", "evaluate", "forecast"):
        if not cfg.data and not cfg.series:
            problems.append(f"{command}: one of --data or --series is required")
    if cfg.series and not cfg.label:
        problems.append("--series needs --label")
    if cfg.data and command in ("train", "evaluate", "compare", "explain") and not cfg.series:
        need("region", " with --data")
    if command == "forecast" and cfg.data and not cfg.series:
        need("region", " with --data")
    if command in ("evaluate", "transfer", "explain", "forecast"):
        need("model")
    if command == "transfer" and not cfg.all_regions and not cfg.regions:
        problems.append("transfer: give --region (repeatable) or --all-regions")
    if command == "forecast":
        need("test_start")
        if cfg.horizon is None or cfg.horizon < 1:
            problems.append("forecast: --horizon must be a positive integer")
    for name in ("data", "series", "model"):
        exists(name)
    for name in ("train_end", "test_start"):
        value = getattr(cfg, name)
        if value:
            try:
                parse_date(value)
            except ValueError:
                problems.append(f"{name}: not an ISO date: {value!r}")
    if command in ("train", "compare") or (command in ("transfer", "explain") and cfg.native):
        try:
            cfg.model_config()
        except (StructureError, TypeError, ValueError) as exc:
            problems.append(f"model config: {exc}")
    if cfg.jobs < 1:
        problems.append("--jobs must be at least 1")
    if cfg.scaler_policy not in ("auto", "source", "target-full", "target-train"):
        problems.append(f"unknown scaler policy {cfg.scaler_policy!r}")
    return problems


def _slug(name):
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "region"


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, allow_nan=False)
        fh.write("\n")


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, command, cfg):
        self.command, self.cfg = command, cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs, self.timings = [], {}

    def path(self, name):
        p = self.out / name
        self.outputs.append(p)
        return p

    def json(self, name, obj):
        _write_json(self.path(name), obj)

    def timed(self, label):
        run = self

        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[label] = time.perf_counter() - self.t0

        return _T()

    def manifest(self):
        inputs = {}
        for name in ("data", "series", "model"):
            p = getattr(self.cfg, name)
            if p:
                inputs[name] = {"path": str(p), "sha256": _sha256(p)}
        _write_json(self.out / "run_manifest.json", {
            "command": self.command,
            "config": dataclasses.asdict(self.cfg),
            "seed": self.cfg.seed,
            "backend": _jit.BACKEND,
            "version": __version__,
            "inputs": inputs,
            "outputs": {str(p.relative_to(self.out)): _sha256(p) for p in self.outputs},
            "timings_seconds": self.timings,
        })


def _load_target(cfg):
    """The single series a command works on."""
    if cfg.series:
        return load_simple_csv(cfg.series, cfg.label)
    active, warnings = load_active(cfg.data, [cfg.region])
    for w in warnings:
        log.warning(w)
    return active[cfg.region]


def _scaler_for(cfg, model, series, spec):
    policy = cfg.scaler_policy
    if policy == "auto":
        same = model.training_region is not None and model.training_region == series.region_name
        policy = "source" if same else "target-full"
    return target_scaler(series, policy, model, spec)


def cmd_ingest(cfg, run):
    active, warnings = load_active(cfg.data, cfg.regions or None)
    written = {}
    for name, series in active.items():
        p = run.path(f"{_slug(name)}.csv")
        write_active_csv(series, p)
        written[name] = p.name
    run.json("ingest_warnings.json", {"files": written, "warnings": warnings})
    log.info("wrote %d region files", len(written))


def cmd_train(cfg, run):
    series = _load_target(cfg)
    config = cfg.model_config()
    train_part, _ = split_by_date(series, cfg.split())
    scaler = fit_scaler(train_part)
    dataset = make_windows(transform(train_part.values, scaler), config.window_size)

    def progress(epoch, loss, val):
        log.debug("epoch %d loss %.6g val %s", epoch, loss, val)

    with run.timed("train"):
        params, report = train(config, dataset, log=progress)
    run.timings["train_loop"] = report.seconds
    model = RecurrentModel(config, params, scaler, series.region_name,
                           {"train_start": train_part.start.isoformat(),
                            "train_end": train_part.end.isoformat()})
    model.save(run.path("model.json"))
    run.json("train_report.json", report.to_dict(timing=False))
    log.info("trained %s on %s: final loss %.6g", config.describe(), series.region_name,
             report.train_loss[-1])


def cmd_evaluate(cfg, run):
    model = RecurrentModel.load(cfg.model)
    series = _load_target(cfg)
    spec = cfg.split()
    start = parse_date(cfg.test_start) if cfg.test_start else first_test_date(spec)
    scaler = _scaler_for(cfg, model, series, spec)
    report = evaluate_one_step(model, scaler, series, start,
                               approach="native" if model.training_region == series.region_name
                               else "transfer")
    slug = _slug(series.region_name)
    run.json(f"eval_{slug}.json", report.to_dict())
    report.write_csv(run.path(f"eval_{slug}.csv"))
    log.info("%s MAE %.2f", series.region_name, report.mae)


def cmd_compare(cfg, run):
    series = _load_target(cfg)
    presets = None
    if cfg.presets:
        presets = [(p["architecture"], tuple(p["hidden_units"]), p["window_size"])
                   for p in cfg.presets]
    kw = {} if presets is None else {"presets": presets}
    with run.timed("compare"):
        table = compare_architectures(series, cfg.split(), base=cfg.model_config(),
                                      base_seed=cfg.seed, jobs=cfg.jobs, **kw)
    table.write_csv(run.path("comparison.csv"))
    run.json("comparison.json", table.to_dict())
    for r in table.rows:
        log.info("%-12s %-10s w=%d MAE %s", r.architecture, r.hidden_units, r.window_size, r.mae)


def _regions(cfg):
    active, warnings = load_active(cfg.data, None if cfg.all_regions else cfg.regions)
    for w in warnings:
        log.debug(w)
    return list(active.values())


def cmd_transfer(cfg, run):
    model = RecurrentModel.load(cfg.model)
    regions = _regions(cfg)
    spec = cfg.split()
    policy = "target-full" if cfg.scaler_policy == "auto" else cfg.scaler_policy
    with run.timed("transfer"):
        reports = run_approach1(model, regions, spec, policy, jobs=cfg.jobs)
    native = []
    if cfg.native:
        config = cfg.model_config()

        def one(series):
            try:
                return run_approach2(series, config, spec, cfg.late_start_train_days)
            except DataError as exc:
                return RegionFailure(series.region_name, str(exc))

        with run.timed("native"):
            native = ordered_map(one, regions, cfg.jobs)
    failures = []
    for kind, batch in (("transfer", reports), ("native", native)):
        for r in batch:
            if isinstance(r, EvaluationReport):
                slug = _slug(r.region_name)
                run.json(f"{kind}_{slug}.json", r.to_dict())
                r.write_csv(run.path(f"{kind}_{slug}.csv"))
            else:
                failures.append({"approach": kind, "region": r.region_name, "error": r.error})
    write_approach_table(approach_table(reports, native or None), run.path("approach_table.csv"))
    run.json("transfer_summary.json", {"model": model.describe(),
                                       "source_region": model.training_region,
                                       "regions": [r.region_name for r in regions],
                                       "failures": failures})
    for f in failures:
        log.warning("%s/%s: %s", f["approach"], f["region"], f["error"])


def cmd_explain(cfg, run):
    model = RecurrentModel.load(cfg.model)
    series = _load_target(cfg)
    spec = cfg.split()
    start = first_test_date(spec)
    scaler = _scaler_for(cfg, model, series, spec)
    slug = _slug(series.region_name)
    trace = capture_trace(model, scaler, series, start)
    T = trace.matrix.shape[0]
    window = cfg.analysis_windows.get(series.region_name)
    day_range = (min(window[0], T - 1), min(window[1], T)) if window else None

    export_heatmap(trace, run.out / f"heatmap_transfer_{slug}", cell_px=cfg.cell_px)
    run.outputs += [run.out / f"heatmap_transfer_{slug}{e}" for e in (".csv", ".png", ".json")]
    env_a = extract_envelope(trace, day_range, cfg.absolute)
    env_a.write_csv(run.path(f"envelope_transfer_{slug}.csv"))
    summary = {"region": series.region_name, "trace_shape": list(trace.shape),
               "day_range": list(env_a.day_range), "absolute": cfg.absolute}

    if cfg.native:
        native, _, nstart = train_native(series, cfg.model_config(), spec,
                                         cfg.late_start_train_days)
        if nstart != start:
            raise DataError(f"{series.region_name}: native test period starts {nstart}, "
                            f"transfer on {start}; envelopes would not align")
        trace_b = capture_trace(native, native.scaler, series, start)
        export_heatmap(trace_b, run.out / f"heatmap_native_{slug}", cell_px=cfg.cell_px)
        run.outputs += [run.out / f"heatmap_native_{slug}{e}" for e in (".csv", ".png", ".json")]
        env_b = extract_envelope(trace_b, env_a.day_range, cfg.absolute)
        env_b.write_csv(run.path(f"envelope_native_{slug}.csv"))
        drift = compare_envelopes(env_a, env_b, series.values[-T:])
        summary["drift"] = drift.to_dict()
    run.json(f"explain_{slug}.json", summary)


def cmd_forecast(cfg, run):
    model = RecurrentModel.load(cfg.model)
    series = _load_target(cfg)
    scaler = _scaler_for(cfg, model, series, cfg.split())
    report, fc = evaluate_then_forecast(model, scaler, series, cfg.test_start, cfg.horizon)
    slug = _slug(series.region_name)
    run.json(f"eval_{slug}.json", report.to_dict())
    report.write_csv(run.path(f"eval_{slug}.csv"))
    fc.write_csv(run.path(f"forecast_{slug}.csv"))
    fc.write_json(run.path(f"forecast_{slug}.json"))
    for w in fc.warnings:
        log.warning(w)
    log.info("%s test MAE %.2f; forecast %s..%s", series.region_name, report.mae,
             fc.dates[0], fc.dates[-1])


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def _fail(code, kind, message, details=None):
    payload = {"error": kind, "message": message, "exit_code": code}
    if details:
        payload["details"] = details
    print(json.dumps(payload), file=sys.stderr)
    return code


def execute(command, cfg):
    problems = validate(command, cfg)
    if problems:
        raise ConfigError(problems)
    run = Run(command, cfg)
    with run.timed("total"):
        HANDLERS[command](cfg, run)
    run.manifest()
    return run


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        if args.command == "replay":
            with open(args.manifest, encoding="utf-8") as fh:
                manifest = json.load(fh)
            cfg = RunConfig(**manifest["config"])
            if args.out:
                cfg.out = args.out
            execute(manifest["command"], cfg)
        else:
            execute(args.command, resolve_config(args))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.problems)
    except (StructureError, TypeError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except FileNotFoundError as exc:
        return _fail(EXIT_DATA, "data", str(exc))
    except (DataError, KeyError) as exc:
        return _fail(EXIT_DATA, "data", str(exc))
    except (NumericError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, "numeric", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
