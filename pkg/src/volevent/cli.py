"""Command-line front end: ``study``, ``regress``, ``simulate`` and ``fit``.

Results go to files under the output directory (and a short summary to
stdout); logs go to stderr. Exit codes: 0 success, 2 config error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__, crosssection, eventstudy, garch
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, TooFewCases, VolEventError
from .marketdata import (
    WindowSpec,
    build_panel,
    history_before,
    read_cases,
    read_prices,
    resolve_window,
)
from .simulate import SimSpec, simulate_panel

logger = logging.getLogger("volevent")


class _KeyValueFormatter(logging.Formatter):
    def format(self, record):
        msg = record.getMessage().replace('"', "'")
        return f'level={record.levelname} logger={record.name} msg="{msg}"'


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_KeyValueFormatter())
    root = logging.getLogger("volevent")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_manifest(out: Path, command: str, cfg: RunConfig, inputs: Sequence[Path] = ()) -> None:
    manifest = {
        "command": command,
        "config": cfg.echo(),
        "seed": cfg.seed,
        "versions": {
            "volevent": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "inputs": {str(p): _digest(p) for p in inputs},
    }
    _write(out / "manifest.json", _dump(manifest))


def _slug(spec: WindowSpec) -> str:
    return re.sub(r"[^0-9a-z]+", "_", spec.key.replace("-", "m").replace("+", "p"))


def _load_data(cfg: RunConfig):
    price_path, case_path = cfg.require_inputs()
    prices = read_prices(price_path)
    cases = read_cases(case_path)
    if cfg.market_ticker not in prices:
        raise DataError(f"{price_path}: no rows for market ticker {cfg.market_ticker!r}")
    panels = {}
    for case in cases:
        if case.ticker in panels or case.ticker not in prices:
            continue
        try:
            panels[case.ticker] = build_panel(prices, case.ticker, cfg.market_ticker)
        except DataError as exc:
            logger.warning("ticker %s unusable: %s", case.ticker, exc)
    return (price_path, case_path), cases, panels


def _study_config(cfg: RunConfig) -> eventstudy.StudyConfig:
    return eventstudy.StudyConfig(
        estimation_length=cfg.estimation_length,
        replications=cfg.replications,
        seed=cfg.seed,
        workers=cfg.workers,
        normalization=cfg.normalization,
        min_obs=cfg.min_obs,
    )


def cmd_study(cfg: RunConfig) -> int:
    inputs, cases, panels = _load_data(cfg)
    out = Path(cfg.output_dir)
    scfg = _study_config(cfg)
    groups = cfg.group_values()
    results = []
    for spec in cfg.window_specs():
        logger.info("window %s: fitting %d cases", spec.label, len(cases))
        per_group = eventstudy.run_study(cases, panels, spec, scfg, groups)
        for group, res in per_group.items():
            _write(out / "cav" / f"{group}_{_slug(spec)}.json", _dump(res.to_dict()))
            results.append(res)
    if not results:
        raise TooFewCases("no group has at least 3 usable cases in any window")
    order = {g: i for i, g in enumerate(["investor", "state", "settled"])}
    results.sort(key=lambda r: order.get(r.group, 99))
    table = eventstudy.table_csv(results)
    _write(out / "table2.csv", table)
    _write(out / "cav_paths.csv", eventstudy.path_csv(results))
    write_manifest(out, "study", cfg, inputs)
    sys.stdout.write(table)
    return 0


def abnormal_volatilities(cases, panels, spec: WindowSpec, estimation_length: int) -> dict[str, float]:
    """Case-level log variance ratio, pre-event window = estimation range."""
    out = {}
    for case in cases:
        panel = panels.get(case.ticker)
        if panel is None:
            logger.warning("case %s: no price data", case.case_id)
            continue
        try:
            window = resolve_window(panel, case.outcome_date, spec)
            pre = history_before(window.start, estimation_length)
            out[case.case_id] = crosssection.abnormal_volatility(
                panel.stock[window.start:window.stop], panel.stock[pre.start:pre.stop]
            )
        except VolEventError as exc:
            logger.warning("case %s: %s", case.case_id, exc)
    return out


def cmd_regress(cfg: RunConfig) -> int:
    inputs, cases, panels = _load_data(cfg)
    out = Path(cfg.output_dir)
    spec = WindowSpec.parse(cfg.regress_window)
    av = abnormal_volatilities(cases, panels, spec, cfg.estimation_length)
    design = crosssection.build_design(
        cases, av, extra=cfg.regress_extra, skip_incomplete=cfg.skip_incomplete
    )
    logger.info("regression on %d cases (%d excluded)", len(design.case_ids), len(design.excluded))
    result = crosssection.fit_ols(design.X, design.y, design.names, robust=cfg.robust)
    payload = result.to_dict()
    payload["case_ids"] = list(design.case_ids)
    payload["response"] = design.y.tolist()
    payload["window"] = spec.label
    _write(out / "regression.json", _dump(payload))
    _write(out / "regression.txt", result.table())
    write_manifest(out, "regress", cfg, inputs)
    sys.stdout.write(result.table())
    return 0


def sim_spec(cfg: RunConfig) -> SimSpec:
    try:
        return SimSpec(
            K=cfg.sim_K,
            T=cfg.sim_T,
            window=WindowSpec.parse(cfg.sim_window),
            params=cfg.sim_params(),
            injected_M=cfg.sim_injected_M,
            seed=cfg.seed,
            market_sd=cfg.sim_market_sd,
            estimation_length=cfg.estimation_length,
            groups=tuple(cfg.sim_groups),
            market_ticker=cfg.market_ticker,
            covariates=cfg.sim_covariates,
            feature_effects=dict(cfg.sim_feature_effects),
        )
    except (ValueError, VolEventError) as exc:
        raise ConfigError(f"simulation settings: {exc}") from None


def cmd_simulate(cfg: RunConfig) -> int:
    spec = sim_spec(cfg)
    out = Path(cfg.output_dir)
    study = simulate_panel(spec)
    price_path, case_path = study.write(out)
    write_manifest(out, "simulate", cfg, [price_path, case_path])
    sys.stdout.write(f"wrote {price_path} and {case_path}\n")
    return 0


def cmd_fit(cfg: RunConfig, case_id: str) -> int:
    _, cases, panels = _load_data(cfg)
    match = [c for c in cases if c.case_id == case_id]
    if not match:
        raise DataError(f"case {case_id!r} not in {cfg.case_file}")
    case = match[0]
    if case.ticker not in panels:
        raise DataError(f"no usable price data for ticker {case.ticker}")
    spec = cfg.window_specs()[0]
    fitted = eventstudy.fit_case(case, panels[case.ticker], spec, _study_config(cfg))
    f = fitted.fit
    payload = f.to_dict()
    payload["case_id"] = case.case_id
    payload["window"] = spec.label
    payload["estimation_range"] = [fitted.estimation.start, fitted.estimation.stop - 1]
    payload["forecast_variance"] = fitted.window_resid.variance.tolist()
    payload["window_resid"] = fitted.window_resid.resid.tolist()
    text = _dump(payload)
    _write(Path(cfg.output_dir) / f"fit_{case.case_id}.json", text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volevent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--window", action="append", help="window like -1w,+1w (repeatable)")
    common.add_argument("--group", action="append", help="outcome group filter (repeatable)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any flat config key")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("study", parents=[common], help="CAV tables per outcome group and window")
    sub.add_parser("regress", parents=[common], help="regress case-level abnormal volatility")
    sub.add_parser("simulate", parents=[common], help="write a synthetic dataset")
    p_fit = sub.add_parser("fit", parents=[common], help="GARCH diagnostics for one case")
    p_fit.add_argument("case_id")
    return parser


def _overrides(args) -> dict:
    over = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        over[key.strip()] = value
    if args.seed is not None:
        over["seed"] = args.seed
    if args.workers is not None:
        over["workers"] = args.workers
    if args.window:
        over["windows"] = args.window
    if args.group:
        over["groups"] = args.group
    if args.out:
        over["output.dir"] = args.out
    return over


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "study":
            return cmd_study(cfg)
        if args.command == "regress":
            return cmd_regress(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_fit(cfg, args.case_id)
    except VolEventError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("IO error: %s", exc)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
