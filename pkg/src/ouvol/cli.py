"""Command-line front end.

    ouvol <experiment> --config FILE [--set key=value]... [--workers N] [--seed S] [--out DIR]

Experiments: price, step-study, error-study, order-fit, determ-check, sweep.
The config is a JSON object; see ``DEFAULTS`` for every accepted key.  Dotted
``--set`` overrides are applied on top of the file and values are parsed as
JSON where possible (``--set ou.alpha=100``, ``--set vol.kind=exp_shift``).

``price`` and ``determ-check`` produce one CSV row per parameter combination.
A ``sweep`` section lists axes; keys inside one axis are zipped, and axes are
combined as a Cartesian product.  ``exclude`` entries drop matching
combinations, and each dropped combination is reported on stderr.  ``sweep``
runs the row experiment named by the config's ``experiment`` key.

Every run writes its CSV tables plus ``manifest.json``, the fully resolved
config.  Passing the manifest back as ``--config`` reproduces the outputs
byte for byte.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .convergence import em_vs_exact_strong_error, price_error_order, sigma_bar_error_order
from .montecarlo import discretization_error_study, price_option_mc, step_size_study
from .pricing import MarketParams, bs_price_conditional
from .report import write_csv
from .sde import GridSpec, OUParams
from .volatility import avg_sigma_sq_exact_deterministic, vol_from_dict

OUT_DIR_ENV = "OUVOL_OUT_DIR"
ROW_EXPERIMENTS = ("price", "determ-check")
EXPERIMENTS = ROW_EXPERIMENTS + ("step-study", "error-study", "order-fit")
ORDER_KINDS = ("sigma_bar", "price", "em_exact")

DEFAULTS = {
    "experiment": None,
    "market": {"spot": 1.0, "strike": 1.0, "rate": 0.0, "maturity": 1.0, "drift": 0.0},
    "ou": {"alpha": 1.0, "k": 0.1, "y0": 0.1},
    "vol": {"kind": "abs_affine", "a": 1.0, "b": 0.0, "c": 0.02},
    "dt": 0.001,
    "dt_list": [1e-2, 1e-3, 1e-4],
    "fine_dt": 1e-4,
    "coarse_factors": [100, 10],
    "m_ladder": [100, 1000, 10000],
    "fine_m": None,
    "order_kinds": list(ORDER_KINDS),
    "n_paths": 1000,
    "seed": 20151217,
    "substream_offset": 0,
    "endpoints": "right",
    "sweep": [],
    "exclude": [],
    "manifest": None,
}
_FREE_KEYS = {"sweep", "exclude", "manifest"}


class ConfigError(ValueError):
    pass


# -- config handling -------------------------------------------------------


def _check_keys(cfg: dict, ref: dict, prefix: str = "") -> None:
    for key, value in cfg.items():
        name = prefix + key
        if key not in ref:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(ref[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {name!r} must be an object")
            _check_keys(value, ref[key], name + ".")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(out.get(key), dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _split_key(key: str) -> list[str]:
    parts = key.split(".")
    ref = DEFAULTS
    for i, part in enumerate(parts):
        if not isinstance(ref, dict) or part not in ref or (i == 0 and part in _FREE_KEYS):
            raise ConfigError(f"unknown config key {key!r}")
        ref = ref[part]
    if isinstance(ref, dict):
        raise ConfigError(f"config key {key!r} names a section, not a value")
    return parts


def set_dotted(cfg: dict, key: str, value) -> None:
    parts = _split_key(key)
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def get_dotted(cfg: dict, key: str):
    node = cfg
    for part in _split_key(key):
        node = node[part]
    return node


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path, overrides=()) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise ConfigError(f"config file {path} is empty")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not raw:
        raise ConfigError(f"config file {path} must hold a non-empty JSON object")
    _check_keys(raw, DEFAULTS)
    cfg = _merge(DEFAULTS, raw)
    for text in overrides:
        key, value = _parse_override(text)
        set_dotted(cfg, key, value)
    return cfg


def _axes(sweep) -> list[dict]:
    if isinstance(sweep, dict):
        sweep = [{k: v} for k, v in sweep.items()]
    axes = []
    for axis in sweep:
        if not isinstance(axis, dict) or not axis:
            raise ConfigError("each sweep axis must be a non-empty object of key -> list")
        lengths = {len(v) if isinstance(v, list) else -1 for v in axis.values()}
        if len(lengths) != 1 or -1 in lengths:
            raise ConfigError(f"sweep axis {list(axis)} needs lists of equal length")
        for key in axis:
            _split_key(key)
        axes.append(axis)
    return axes


def _matches(cfg: dict, rule: dict) -> bool:
    for key, want in rule.items():
        have = get_dotted(cfg, key)
        if isinstance(want, (int, float)) and isinstance(have, (int, float)):
            if not math.isclose(have, want, rel_tol=1e-12, abs_tol=0.0):
                return False
        elif have != want:
            return False
    return True


def expand(cfg: dict) -> tuple[list[dict], list[dict]]:
    """All combinations of the sweep section, split into (kept, excluded)."""
    axes = _axes(cfg["sweep"])
    for rule in cfg["exclude"]:
        if not isinstance(rule, dict) or not rule:
            raise ConfigError("each exclude entry must be a non-empty object")
        for key in rule:
            _split_key(key)
    kept, dropped = [], []
    for picks in itertools.product(*(range(len(next(iter(a.values())))) for a in axes)):
        combo = copy.deepcopy(cfg)
        for axis, i in zip(axes, picks):
            for key, values in axis.items():
                set_dotted(combo, key, values[i])
        (dropped if any(_matches(combo, r) for r in cfg["exclude"]) else kept).append(combo)
    return kept, dropped


def build_params(cfg: dict):
    """Validated (market, ou, vol) for one combination; raises ConfigError."""
    try:
        mkt = MarketParams(**{k: float(v) for k, v in cfg["market"].items()})
        ou = OUParams(**{k: float(v) for k, v in cfg["ou"].items()})
        vol = vol_from_dict(cfg["vol"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from exc
    if cfg["endpoints"] not in ("right", "left"):
        raise ConfigError(f"endpoints must be 'right' or 'left', got {cfg['endpoints']!r}")
    if not (isinstance(cfg["n_paths"], int) and cfg["n_paths"] >= 1):
        raise ConfigError(f"n_paths must be a positive integer, got {cfg['n_paths']!r}")
    return mkt, ou, vol


# -- experiments -----------------------------------------------------------


def _vol_columns(cfg: dict) -> dict:
    v = cfg["vol"]
    if v["kind"] == "abs_affine":
        return {"vol": v["kind"], "a": v["a"], "b": v["b"], "c": None}
    return {"vol": v["kind"], "a": None, "b": None, "c": v["c"]}


def price_row(cfg: dict, workers: int) -> dict:
    mkt, ou, vol = build_params(cfg)
    est = price_option_mc(
        mkt, ou, vol, GridSpec.from_step(mkt.maturity, cfg["dt"]), cfg["n_paths"], cfg["seed"],
        workers=workers, substream_offset=cfg["substream_offset"], endpoints=cfg["endpoints"],
    )
    cols = _vol_columns(cfg)
    return {
        "T": mkt.maturity, "k": ou.k, "r": mkt.rate, "K": mkt.strike,
        "a": cols["a"], "b": cols["b"], "alpha": ou.alpha,
        "avg_var": est.mean_avg_var, "price": est.mean_discounted_price, "std_err": est.std_error_price,
        "vol": cols["vol"], "c": cols["c"], "S0": mkt.spot, "y0": ou.y0, "dt": est.dt, "m": est.m,
        "n_paths": est.n_paths, "avg_var_se": est.std_error_avg_var, "d1": est.mean_d1, "d2": est.mean_d2,
    }


def determ_row(cfg: dict, workers: int) -> dict:
    mkt, ou, vol = build_params(cfg)
    noiseless = OUParams(ou.alpha, 0.0, ou.y0)
    g = GridSpec.from_step(mkt.maturity, cfg["dt"])
    approx = price_option_mc(mkt, noiseless, vol, g, 1, cfg["seed"], endpoints=cfg["endpoints"])
    exact_var = avg_sigma_sq_exact_deterministic(vol, noiseless, mkt.maturity)
    exact = bs_price_conditional(mkt, math.sqrt(exact_var)).discounted
    cols = _vol_columns(cfg)
    return {
        "T": mkt.maturity, "alpha": ou.alpha, "r": mkt.rate, "K": mkt.strike,
        "vol": cols["vol"], "a": cols["a"], "b": cols["b"], "c": cols["c"],
        "dt": g.dt, "endpoints": cfg["endpoints"],
        "approx_avg_var": approx.mean_avg_var, "exact_avg_var": exact_var,
        "approx_price": approx.mean_discounted_price, "exact_price": exact,
        "abs_diff": abs(approx.mean_discounted_price - exact),
    }


_ROW_FUNCS = {"price": price_row, "determ-check": determ_row}


def run_rows(cfg: dict, experiment: str, workers: int) -> dict[str, list[dict]]:
    combos, dropped = expand(cfg)
    for combo in dropped:
        print(f"excluded: {_describe(combo, cfg)}", file=sys.stderr)
    for combo in combos:
        build_params(combo)
    rows = [_ROW_FUNCS[experiment](combo, workers) for combo in combos]
    return {experiment.replace("-", "_"): rows}


def _describe(combo: dict, cfg: dict) -> str:
    keys = [k for axis in _axes(cfg["sweep"]) for k in axis]
    return ", ".join(f"{k}={get_dotted(combo, k)}" for k in keys)


def run_step_study(cfg: dict, workers: int) -> dict[str, list[dict]]:
    mkt, ou, vol = build_params(cfg)
    ests = step_size_study(
        mkt, ou, vol, cfg["dt_list"], cfg["n_paths"], cfg["seed"],
        workers=workers, substream_offset=cfg["substream_offset"], endpoints=cfg["endpoints"],
    )
    rows = [
        {"dt": dt, "m": e.m, "alpha": ou.alpha, "avg_var": e.mean_avg_var, "d1": e.mean_d1,
         "d2": e.mean_d2, "price": e.mean_discounted_price, "std_err": e.std_error_price,
         "avg_var_se": e.std_error_avg_var, "n_paths": e.n_paths}
        for dt, e in zip(cfg["dt_list"], ests)
    ]
    return {"step_study": rows}


def run_error_study(cfg: dict, workers: int) -> dict[str, list[dict]]:
    mkt, ou, vol = build_params(cfg)
    stats = discretization_error_study(
        mkt, ou, vol, cfg["fine_dt"], cfg["coarse_factors"], cfg["n_paths"], cfg["seed"],
        workers=workers, substream_offset=cfg["substream_offset"], endpoints=cfg["endpoints"],
    )
    fine_dt = GridSpec.from_step(mkt.maturity, cfg["fine_dt"]).dt
    rows = [
        {"factor": q, "coarse_dt": q * fine_dt, "alpha": ou.alpha, "average": s.average,
         "std_error": s.std_error, "median": s.median, "std_deviation": s.std_deviation,
         "excess_kurtosis": s.excess_kurtosis, "skewness": s.skewness, "min": s.min,
         "max": s.max, "count": s.count}
        for q, s in stats.items()
    ]
    return {"error_study": rows}


def run_order_fit(cfg: dict, workers: int) -> dict[str, list[dict]]:
    mkt, ou, vol = build_params(cfg)
    unknown = set(cfg["order_kinds"]) - set(ORDER_KINDS)
    if unknown:
        raise ConfigError(f"unknown order_kinds {sorted(unknown)}; choose from {ORDER_KINDS}")
    common = dict(workers=workers)
    fits = {}
    for kind in cfg["order_kinds"]:
        if kind == "sigma_bar":
            fits[kind] = sigma_bar_error_order(
                ou, vol, mkt.maturity, cfg["m_ladder"], cfg["n_paths"], cfg["seed"],
                fine_m=cfg["fine_m"], endpoints=cfg["endpoints"], **common)
        elif kind == "price":
            fits[kind] = price_error_order(
                mkt, ou, vol, cfg["m_ladder"], cfg["n_paths"], cfg["seed"],
                fine_m=cfg["fine_m"], endpoints=cfg["endpoints"], **common)
        else:
            fits[kind] = em_vs_exact_strong_error(
                ou, mkt.maturity, cfg["m_ladder"], cfg["n_paths"], cfg["seed"], **common)
    points = [
        {"kind": kind, "m": m, "mean_error": e, "std_error": s}
        for kind, fit in fits.items()
        for m, e, s in zip(fit.m_values, fit.mean_errors, fit.std_errors)
    ]
    summary = [
        {"kind": kind, "fitted_order": fit.fitted_order, "r_squared": fit.r_squared,
         "n_paths": fit.n_paths, "degenerate": fit.degenerate,
         "hoelder_verified": fit.hoelder_verified, "notes": "; ".join(fit.notes)}
        for kind, fit in fits.items()
    ]
    return {"order_fit_points": points, "order_fit_summary": summary}


# -- entry point -------------------------------------------------------------


def _summarise(tables: dict[str, list[dict]]) -> None:
    for name, rows in tables.items():
        print(f"== {name} ({len(rows)} rows)")
        if not rows:
            continue
        cols = list(rows[0])
        print("  ".join(f"{c:>12}" for c in cols))
        for row in rows:
            print("  ".join(f"{_short(row[c]):>12}" for c in cols))


def _short(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v)
    if isinstance(v, float):
        if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e6):
            return f"{v:.6e}"
        return f"{v:.6f}"
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ouvol",
        description="Monte Carlo call pricing with an Ornstein-Uhlenbeck driven volatility.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS + ("sweep",))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-key override, may repeat")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if not (isinstance(cfg["seed"], int) and 0 <= cfg["seed"] < 2**64):
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {cfg['seed']!r}")
        experiment = args.experiment
        if experiment == "sweep":
            experiment = cfg["experiment"]
            if experiment not in ROW_EXPERIMENTS:
                raise ConfigError(f"sweep needs 'experiment' set to one of {ROW_EXPERIMENTS}")
            if not cfg["sweep"]:
                raise ConfigError("sweep needs a non-empty 'sweep' section")
        elif cfg["experiment"] not in (None, experiment):
            raise ConfigError(f"config is for {cfg['experiment']!r}, not {experiment!r}")
        cfg["experiment"] = experiment
        if experiment not in ROW_EXPERIMENTS and (cfg["sweep"] or cfg["exclude"]):
            raise ConfigError(f"{experiment} does not support sweep/exclude sections")
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = Path(args.out or os.environ.get(OUT_DIR_ENV) or "results")

        if experiment in ROW_EXPERIMENTS:
            tables = run_rows(cfg, experiment, args.workers)
        else:
            build_params(cfg)
            tables = {
                "step-study": run_step_study,
                "error-study": run_error_study,
                "order-fit": run_order_fit,
            }[experiment](cfg, args.workers)
    except (ConfigError, ValueError, ArithmeticError, OSError) as exc:
        if isinstance(exc, ConfigError):
            parser.print_usage(sys.stderr)
        print(f"ouvol: error: {exc}", file=sys.stderr)
        return 1

    out.mkdir(parents=True, exist_ok=True)
    written = [str(write_csv(out / f"{name}.csv", rows).name) for name, rows in tables.items()]
    manifest = dict(cfg)
    manifest["manifest"] = {"version": __version__, "outputs": written}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _summarise(tables)
    print(f"wrote {', '.join(written)} and manifest.json to {out}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
