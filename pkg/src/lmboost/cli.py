"""Command line interface.

Configuration values resolve in four layers, later layers winning:
built-in defaults, an INI config file ([common] section plus one
section per subcommand), LMBOOST_* environment variables, then flags.
Unknown config keys and unknown LMBOOST_* variables are rejected so
typos fail loudly. Every subcommand that consumes randomness demands an
explicit seed; there is no silent clock seeding anywhere.

Every delimited artifact starts with a comment line naming the tool
version, the subcommand, a 12-hex digest of the effective semantic
configuration and the seed, so any output file can be traced back to
the exact invocation that produced it. The digest skips execution-only
keys (thread count), which is what makes reruns with different
--threads byte-identical.

Exit codes: 2 for configuration or argument errors, 3 for malformed
input data, 4 for degenerate data (e.g. a table with no events).
"""
import argparse
import configparser
import hashlib
import math
import os
import sys

import numpy as np

from . import __version__
from .boost import (
    BoostParams,
    boost_fit,
    cross_validate_nrounds,
    read_model,
    write_model,
)
from .core import CapBounds, make_partition, time_grid
from .errors import (
    ConfigError,
    DataError,
    DegenerateDataError,
    EnvelopeViolationError,
    InvalidArgumentError,
    OutOfDomainError,
)
from .evaluate import MAPE, RMSE, build_test_set, predict_test_points, score
from .explain import gain_importance, marginal_hazard, partial_dependence, resolve_feature
from .ingest import (
    PBC2_SCHEMA,
    read_longitudinal_csv,
    simulated_schema,
    write_longitudinal_csv,
)
from .landmark import (
    LandmarkScheme,
    UNIFORM,
    build_collapsed_super_dataset,
    build_super_dataset,
    draw_landmarks_panel,
    read_table_csv,
    write_table_csv,
)
from .simulate import (
    scenario_highdim,
    scenario_linear,
    scenario_nonlinear,
    simulate_panel,
)

_REQUIRED = object()

# key -> (type, default, help); type "flag" is a boolean switch
_HYPER_KEYS = {
    "eta": ("float", 0.1, "learning rate in (0, 1]"),
    "max-depth": ("int", 3, "tree depth limit"),
    "nrounds": ("int", 200, "number of boosting rounds"),
    "min-child-weight": ("float", 1.0, "minimum child hessian sum"),
    "subsample": ("float", 1.0, "row subsampling rate per round"),
    "colsample": ("float", 1.0, "feature subsampling rate per round"),
    "alpha": ("float", 0.0, "L1 leaf penalty (newton mode)"),
    "mode": ("str", "newton", "boosting mode: newton or gradient"),
    "cap-lo": ("float", 1e-4, "lower hazard cap (hazard scale)"),
    "cap-hi": ("float", 1e3, "upper hazard cap (hazard scale)"),
}
_PARTITION_KEYS = {
    "time-step": ("float", 0.05, "time bin width"),
    "horizon": ("float", 1.0, "administrative horizon T"),
    "s-step": ("float", None, "optional landmark bin width (default: raw)"),
}
_SCENARIO_KEYS = {
    "scenario": ("str", _REQUIRED, "linear, nonlinear or highdim"),
    "lambda-c": ("float", 0.2, "censoring rate"),
    "lambda-w": ("float", 2.0, "covariate update rate"),
}
_CELL_KEYS = {
    **_SCENARIO_KEYS,
    **_PARTITION_KEYS,
    **_HYPER_KEYS,
    "q": ("int", _REQUIRED, "landmark draws per subject"),
    "scheme": ("str", UNIFORM, "landmark scheme: uniform or visit"),
    "cv-folds": ("int", None, "select nrounds by K-fold CV instead"),
    "max-rounds": ("int", 500, "round budget for CV selection"),
    "test-points": ("int", 1000, "oracle test points"),
    "oracle-sims": ("int", 10000, "oracle replicates per test point"),
}

COMMANDS = {
    "simulate": {
        **_SCENARIO_KEYS,
        "n": ("int", _REQUIRED, "number of subjects"),
        "seed": ("int", _REQUIRED, "simulation seed"),
        "out": ("str", _REQUIRED, "output longitudinal CSV"),
        "horizon": ("float", 1.0, "administrative horizon T"),
        "threads": ("int", 1, "worker threads"),
    },
    "landmark": {
        "in": ("str", _REQUIRED, "input longitudinal CSV"),
        "out": ("str", _REQUIRED, "output occurrence/exposure CSV"),
        "q": ("int", _REQUIRED, "landmark draws per subject"),
        "scheme": ("str", UNIFORM, "uniform or visit"),
        "seed": ("int", _REQUIRED, "landmark draw seed"),
        "schema": ("str", "simulated", "input schema: simulated or pbc2"),
        "no-collapse": ("flag", False, "keep duplicate rows uncollapsed"),
        **_PARTITION_KEYS,
        "threads": ("int", 1, "worker threads"),
    },
    "fit": {
        "table": ("str", _REQUIRED, "occurrence/exposure CSV"),
        "out": ("str", _REQUIRED, "output model file"),
        "seed": ("int", _REQUIRED, "boosting seed"),
        **_HYPER_KEYS,
        **_PARTITION_KEYS,
        "threads": ("int", 1, "worker threads"),
    },
    "cv": {
        "table": ("str", _REQUIRED, "occurrence/exposure CSV"),
        "out": ("str", _REQUIRED, "output CV curve CSV"),
        "seed": ("int", _REQUIRED, "fold and boosting seed"),
        "k": ("int", 10, "number of folds"),
        "max-rounds": ("int", 500, "round budget"),
        **_HYPER_KEYS,
        **_PARTITION_KEYS,
        "threads": ("int", 1, "worker threads"),
    },
    "predict": {
        "model": ("str", _REQUIRED, "fitted model file"),
        "s": ("float", _REQUIRED, "landmark time"),
        "w": ("str", _REQUIRED, "comma-separated covariate values"),
        "w-miss": ("str", None, "comma-separated 0/1 missing flags"),
        "horizon": ("float", None, "prediction horizon (default: grid end)"),
        "grid-step": ("float", None, "emit a survival curve at this step"),
        "out": ("str", _REQUIRED, "output CSV"),
        "threads": ("int", 1, "worker threads"),
    },
    "evaluate": {
        **_CELL_KEYS,
        "n": ("int", _REQUIRED, "training subjects"),
        "seed": ("int", _REQUIRED, "cell seed"),
        "out": ("str", _REQUIRED, "output metric CSV"),
        "threads": ("int", 1, "worker threads"),
    },
    "pdp": {
        "model": ("str", _REQUIRED, "fitted model file"),
        "table": ("str", _REQUIRED, "occurrence/exposure CSV"),
        "feature": ("str", _REQUIRED, "feature name or index"),
        "grid-points": ("int", 50, "grid resolution"),
        "out": ("str", _REQUIRED, "output CSV (PNG lands alongside)"),
        "threads": ("int", 1, "worker threads"),
    },
    "importance": {
        "model": ("str", _REQUIRED, "fitted model file"),
        "out": ("str", _REQUIRED, "output CSV (PNG lands alongside)"),
        "threads": ("int", 1, "worker threads"),
    },
    "marginal": {
        "model": ("str", _REQUIRED, "fitted model file"),
        "table": ("str", _REQUIRED, "occurrence/exposure CSV"),
        "feature": ("str", _REQUIRED, "feature name or index"),
        "bins": ("int", 10, "number of equal-width bins"),
        "out": ("str", _REQUIRED, "output CSV (PNG lands alongside)"),
        "threads": ("int", 1, "worker threads"),
    },
    "replicate-study": {
        **{k: v for k, v in _CELL_KEYS.items() if k != "q"},
        "n-grid": ("str", _REQUIRED, "comma-separated training sizes"),
        "q-grid": ("str", _REQUIRED, "comma-separated landmark counts"),
        "seed": ("int", _REQUIRED, "base seed; replicate r uses seed+r"),
        "replicates": ("int", 3, "datasets per grid cell"),
        "out": ("str", _REQUIRED, "output metric CSV (PNG lands alongside)"),
        "threads": ("int", 1, "worker threads"),
    },
}

_RNG_COMMANDS = {"simulate", "landmark", "fit", "cv", "evaluate", "replicate-study"}
# keys that must not affect artifact bytes: thread count is execution
# detail and the output path is the artifact's own address
_EXEC_KEYS = {"threads", "out"}

_ALL_KEYS = {k for tbl in COMMANDS.values() for k in tbl} | {"config"}


def _parse_value(key, typ, raw):
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "flag":
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return str(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {typ}") from None


def _resolve_config(command, args):
    table = COMMANDS[command]
    cfg = {k: (None if d is _REQUIRED else d) for k, (t, d, _) in table.items()}

    path = getattr(args, "config", None) or os.environ.get("LMBOOST_CONFIG")
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in ("common", command):
            if not parser.has_section(section):
                continue
            for raw_key, raw_val in parser.items(section):
                key = raw_key.replace("_", "-")
                if key not in _ALL_KEYS:
                    raise ConfigError(f"unknown config key {raw_key!r} in [{section}]")
                if key in table:
                    cfg[key] = _parse_value(key, table[key][0], raw_val)
                elif section == command:
                    raise ConfigError(
                        f"key {raw_key!r} does not apply to command {command!r}"
                    )

    for env_name, raw_val in sorted(os.environ.items()):
        if not env_name.startswith("LMBOOST_"):
            continue
        key = env_name[len("LMBOOST_"):].lower().replace("_", "-")
        if key == "config":
            continue
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown environment variable {env_name}")
        if key in table:
            cfg[key] = _parse_value(key, table[key][0], raw_val)

    for key, (typ, _, _) in table.items():
        flag_val = getattr(args, key.replace("-", "_"), None)
        if flag_val is not None:
            cfg[key] = _parse_value(key, typ, flag_val)

    for key, (_, default, _) in table.items():
        if default is _REQUIRED and cfg[key] is None:
            raise ConfigError(f"{command}: missing required key {key!r}")
    if command in _RNG_COMMANDS and cfg.get("seed") is None:
        raise ConfigError(f"{command} consumes randomness and requires --seed")
    return cfg


def _artifact_comment(command, cfg):
    items = sorted(
        (k, v) for k, v in cfg.items() if k not in _EXEC_KEYS and v is not None
    )
    blob = "\n".join(f"{k}={v}" for k, v in items)
    digest = hashlib.sha256(blob.encode()).hexdigest()[:12]
    seed = cfg.get("seed")
    seed_text = "none" if seed is None else str(seed)
    return f"lmboost v{__version__} {command} config={digest} seed={seed_text}"


def _fmt(x):
    return repr(float(x))


def _write_rows(path, comment, header, rows):
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _fig_path(out):
    stem, _ = os.path.splitext(out)
    return stem + ".png"


def _make_scenario(cfg, seed):
    name = cfg["scenario"]
    kwargs = dict(lambda_C=cfg["lambda-c"], lambda_W=cfg["lambda-w"],
                  horizon_T=cfg["horizon"])
    if name == "linear":
        return scenario_linear(**kwargs)
    if name == "nonlinear":
        return scenario_nonlinear(**kwargs)
    if name == "highdim":
        return scenario_highdim(dataset_seed=seed, **kwargs)
    raise ConfigError(f"unknown scenario {name!r}")


def _params_from(cfg, seed):
    if cfg["cap-lo"] <= 0 or cfg["cap-hi"] <= cfg["cap-lo"]:
        raise ConfigError("cap bounds must satisfy 0 < cap-lo < cap-hi")
    try:
        return BoostParams(
            eta=cfg["eta"], max_depth=cfg["max-depth"], nrounds=cfg["nrounds"],
            min_child_weight=cfg["min-child-weight"], subsample=cfg["subsample"],
            colsample_bytree=cfg["colsample"], alpha=cfg["alpha"],
            mode=cfg["mode"],
            cap=CapBounds(math.log(cfg["cap-lo"]), math.log(cfg["cap-hi"])),
            seed=seed,
        )
    except InvalidArgumentError as e:
        raise ConfigError(str(e)) from None


def _partition_from(cfg, p, names):
    tb = time_grid(cfg["horizon"], cfg["time-step"])
    sb = time_grid(cfg["horizon"], cfg["s-step"]) if cfg["s-step"] else None
    return make_partition(tb, p, covariate_names=names, s_boundaries=sb)


def _read_table(cfg, with_partition):
    table = read_table_csv(cfg["table"])
    if with_partition:
        table.partition = _partition_from(cfg, table.p, table.names)
    return table


def _sim_covariate_names(path):
    import csv as _csv

    with open(path, newline="") as fh:
        for row in _csv.reader(fh):
            if row and not row[0].startswith("#"):
                header = row
                break
        else:
            raise DataError(f"{path}: empty file")
    fixed = ["id", "visit", "exit", "status", "censor"]
    if header[: len(fixed)] != fixed:
        raise DataError(f"{path}: header does not look like a simulated panel")
    return tuple(header[len(fixed):])


def _cmd_simulate(cfg):
    scenario = _make_scenario(cfg, cfg["seed"])
    panel = simulate_panel(scenario, cfg["n"], cfg["seed"], threads=cfg["threads"])
    names = tuple(f"w_{j + 1}" for j in range(scenario.p))
    write_longitudinal_csv(panel, cfg["out"], names,
                           comment=_artifact_comment("simulate", cfg))
    print(f"wrote {cfg['n']} subjects to {cfg['out']}")


def _cmd_landmark(cfg):
    if cfg["schema"] == "pbc2":
        schema = PBC2_SCHEMA
    elif cfg["schema"] == "simulated":
        schema = simulated_schema(_sim_covariate_names(cfg["in"]))
    else:
        raise ConfigError(f"unknown schema {cfg['schema']!r}")
    subjects, _ = read_longitudinal_csv(cfg["in"], schema, cfg["horizon"])
    names = schema.covariate_names
    partition = _partition_from(cfg, len(names), names)
    scheme = LandmarkScheme(kind=cfg["scheme"], Q=cfg["q"], horizon_T=cfg["horizon"])
    draws = draw_landmarks_panel(scheme, subjects, cfg["seed"])
    if cfg["no-collapse"]:
        table = build_super_dataset(subjects, draws, partition)
    else:
        table = build_collapsed_super_dataset(subjects, draws, partition)
    write_table_csv(table, cfg["out"], comment=_artifact_comment("landmark", cfg))
    print(f"wrote {len(table)} rows to {cfg['out']}")


def _cmd_fit(cfg):
    table = _read_table(cfg, with_partition=True)
    params = _params_from(cfg, cfg["seed"])
    model = boost_fit(table, params)
    write_model(model, cfg["out"], comment=_artifact_comment("fit", cfg))
    print(f"fitted {len(model.trees)} trees; model at {cfg['out']}")


def _cmd_cv(cfg):
    table = _read_table(cfg, with_partition=True)
    params = _params_from(cfg, cfg["seed"])
    best, curve = cross_validate_nrounds(table, params, cfg["k"], cfg["max-rounds"])
    rows = [(str(r), _fmt(v)) for r, v in enumerate(curve)]
    with open(cfg["out"], "w") as fh:
        fh.write(f"# {_artifact_comment('cv', cfg)}\n")
        fh.write(f"# selected_nrounds {best}\n")
        fh.write("round,mean_loss\n")
        for r, v in rows:
            fh.write(f"{r},{v}\n")
    print(f"selected nrounds: {best}")


def _parse_float_list(text, key):
    try:
        return [float(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers") from None


def _cmd_predict(cfg):
    from .predict import predict_survival, predict_survival_curve

    model = read_model(cfg["model"])
    w = np.array(_parse_float_list(cfg["w"], "w"))
    if w.size != len(model.feature_names) - 2:
        raise ConfigError(
            f"w has {w.size} values but the model expects {len(model.feature_names) - 2}"
        )
    w_miss = None
    if cfg["w-miss"] is not None:
        w_miss = np.array(_parse_float_list(cfg["w-miss"], "w-miss")).astype(bool)
        if w_miss.size != w.size:
            raise ConfigError("w-miss must match w in length")
    if model.partition is None or model.partition.time_bins is None:
        raise DataError("model file carries no time grid")
    s = cfg["s"]
    horizon = cfg["horizon"]
    if horizon is None:
        horizon = float(model.partition.time_bins[-1])
    comment = _artifact_comment("predict", cfg)
    if cfg["grid-step"]:
        step = cfg["grid-step"]
        if step <= 0:
            raise ConfigError("grid-step must be positive")
        pts = [s]
        i = 1
        while s + i * step < horizon - 1e-12:
            pts.append(s + i * step)
            i += 1
        pts.append(horizon)
        curve = predict_survival_curve(model, s, w, np.array(pts), w_miss=w_miss)
        _write_rows(cfg["out"], comment, ["time", "survival"],
                    [(_fmt(t), _fmt(v)) for t, v in zip(curve.times, curve.values)])
        from .figures import render_survival_curves

        render_survival_curves(_fig_path(cfg["out"]), [curve], [f"s={s:g}"],
                               "predicted survival")
    else:
        value = predict_survival(model, s, w, horizon, w_miss=w_miss)
        _write_rows(cfg["out"], comment, ["time", "survival"],
                    [(_fmt(horizon), _fmt(value))])
    print(f"wrote {cfg['out']}")


def _run_cell(cfg, n, q, seed, threads):
    """Simulate, landmark, fit and score one (scenario, n, Q, seed) cell."""
    scenario = _make_scenario(cfg, seed)
    panel = simulate_panel(scenario, n, seed, threads=threads)
    names = tuple(f"w_{j + 1}" for j in range(scenario.p))
    partition = _partition_from(cfg, scenario.p, names)
    scheme = LandmarkScheme(kind=cfg["scheme"], Q=q, horizon_T=cfg["horizon"])
    draws = draw_landmarks_panel(scheme, panel, seed)
    table = build_collapsed_super_dataset(panel, draws, partition)
    params = _params_from(cfg, seed)
    if cfg.get("cv-folds"):
        best, _ = cross_validate_nrounds(
            build_super_dataset(panel, draws, partition), params,
            cfg["cv-folds"], cfg["max-rounds"],
        )
        from dataclasses import replace

        params = replace(params, nrounds=best)
    model = boost_fit(table, params)
    points = build_test_set(scenario, cfg["test-points"], seed,
                            n_sims=cfg["oracle-sims"])
    predict_test_points(model, points)
    return points, [(RMSE, score(points, RMSE)), (MAPE, score(points, MAPE))]


def _cmd_evaluate(cfg):
    points, metrics = _run_cell(cfg, cfg["n"], cfg["q"], cfg["seed"], cfg["threads"])
    comment = _artifact_comment("evaluate", cfg)
    rows = [
        (cfg["scenario"], str(cfg["n"]), str(cfg["q"]), str(cfg["seed"]), m, _fmt(v))
        for m, v in metrics
    ]
    _write_rows(cfg["out"], comment, ["scenario", "n", "Q", "seed", "metric", "value"],
                rows)
    from .figures import render_prediction_scatter

    render_prediction_scatter(
        _fig_path(cfg["out"]),
        np.array([p.s_star for p in points]),
        np.array([p.s_hat for p in points]),
        f"{cfg['scenario']}: n={cfg['n']}, Q={cfg['q']}",
    )
    for m, v in metrics:
        print(f"{m}: {v:.6f}")


def _cmd_replicate_study(cfg):
    ns = [int(x) for x in _parse_float_list(cfg["n-grid"], "n-grid")]
    qs = [int(x) for x in _parse_float_list(cfg["q-grid"], "q-grid")]
    if not ns or not qs:
        raise ConfigError("n-grid and q-grid must be nonempty")
    rows = []
    dict_rows = []
    for n in ns:
        for q in qs:
            for r in range(cfg["replicates"]):
                seed = cfg["seed"] + r
                _, metrics = _run_cell(cfg, n, q, seed, cfg["threads"])
                for m, v in metrics:
                    rows.append((cfg["scenario"], str(n), str(q), str(seed), m, _fmt(v)))
                    dict_rows.append({"n": n, "Q": q, "metric": m, "value": v})
                print(f"n={n} Q={q} seed={seed}: "
                      + ", ".join(f"{m}={v:.4f}" for m, v in metrics))
    comment = _artifact_comment("replicate-study", cfg)
    _write_rows(cfg["out"], comment, ["scenario", "n", "Q", "seed", "metric", "value"],
                rows)
    from .figures import render_metric_grid

    render_metric_grid(_fig_path(cfg["out"]), dict_rows,
                       f"scenario {cfg['scenario']}")
    print(f"wrote {len(rows)} rows to {cfg['out']}")


def _cmd_pdp(cfg):
    model = read_model(cfg["model"])
    table = read_table_csv(cfg["table"])
    f = resolve_feature(model, _maybe_int(cfg["feature"]))
    from .boost import _feature_matrix

    X, miss = _feature_matrix(table)
    ok = ~miss[:, f]
    if not ok.any():
        raise DegenerateDataError(
            f"feature {model.feature_names[f]!r} is missing everywhere"
        )
    lo, hi = float(X[ok, f].min()), float(X[ok, f].max())
    grid = np.linspace(lo, hi, cfg["grid-points"])
    pd = partial_dependence(model, table, f, grid)
    comment = _artifact_comment("pdp", cfg)
    _write_rows(cfg["out"], comment, ["grid_value", "mean_hazard"],
                [(_fmt(g), _fmt(v)) for g, v in zip(pd.grid, pd.values)])
    from .figures import render_curve

    render_curve(_fig_path(cfg["out"]), pd.grid, pd.values, pd.feature,
                 "mean predicted hazard", f"partial dependence: {pd.feature}",
                 rug=pd.rug)
    print(f"wrote {cfg['out']}")


def _cmd_importance(cfg):
    model = read_model(cfg["model"])
    names, values = gain_importance(model)
    comment = _artifact_comment("importance", cfg)
    _write_rows(cfg["out"], comment, ["feature", "importance"],
                [(n, _fmt(v)) for n, v in zip(names, values)])
    from .figures import render_bars

    render_bars(_fig_path(cfg["out"]), list(names), values, "relative gain",
                "split-gain importance")
    print(f"wrote {cfg['out']}")


def _cmd_marginal(cfg):
    model = read_model(cfg["model"])
    table = read_table_csv(cfg["table"])
    mh = marginal_hazard(model, table, _maybe_int(cfg["feature"]), n_bins=cfg["bins"])
    comment = _artifact_comment("marginal", cfg)
    _write_rows(
        cfg["out"], comment, ["bin_center", "mean_hazard", "weight"],
        [(_fmt(c), _fmt(v) if np.isfinite(v) else "", _fmt(w))
         for c, v, w in zip(mh.centers, mh.values, mh.counts)],
    )
    from .figures import render_curve

    render_curve(_fig_path(cfg["out"]), mh.centers, mh.values, mh.feature,
                 "mean predicted hazard", f"marginal hazard: {mh.feature}")
    print(f"wrote {cfg['out']}")


def _maybe_int(text):
    try:
        return int(text)
    except (TypeError, ValueError):
        return text


_HANDLERS = {
    "simulate": _cmd_simulate,
    "landmark": _cmd_landmark,
    "fit": _cmd_fit,
    "cv": _cmd_cv,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "pdp": _cmd_pdp,
    "importance": _cmd_importance,
    "marginal": _cmd_marginal,
    "replicate-study": _cmd_replicate_study,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lmboost",
        description="dynamic survival prediction via landmark super-datasets "
                    "and boosted Poisson trees",
    )
    parser.add_argument("--version", action="version",
                        version=f"lmboost {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, table in COMMANDS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="INI config file")
        for key, (typ, default, help_text) in table.items():
            flag = "--" + key
            dest = key.replace("-", "_")
            if typ == "flag":
                p.add_argument(flag, dest=dest, action="store_const", const=True,
                               default=None, help=help_text)
            else:
                p.add_argument(flag, dest=dest, default=None, help=help_text)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args.command, args)
        _HANDLERS[args.command](cfg)
        return 0
    except (ConfigError, InvalidArgumentError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DegenerateDataError, EnvelopeViolationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (DataError, OutOfDomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
