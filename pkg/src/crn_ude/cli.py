"""Command-line front end.

Subcommands orchestrate the library over built-in model bundles (or DSL
files, for simulation) and emit plot-ready CSV files, each with a JSON
sidecar embedding the fully materialized configuration and tool version.
Outputs are deterministic per seed and land only inside --out.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import experiments, zoo
from .dsl import parse_network
from .identifiability import (
    ci_width,
    confidence_interval,
    data_quality_scan,
    structural_nonident_check,
)
from .integrate import IntegrationError, integrate
from .likelihood import Dataset
from .network import NetworkError, assemble_rhs

try:
    from importlib.metadata import version as _dist_version

    VERSION = _dist_version("crn-ude")
except Exception:  # pragma: no cover - not installed
    VERSION = "0.0.0"


class ConfigError(Exception):
    """Invalid configuration; message names the offending field."""


class NumericalError(Exception):
    """Computation failed (divergent simulation, no acceptable fit)."""


# --- configuration -------------------------------------------------------------


def _require(obj, field, kind, path):
    if field not in obj:
        raise ConfigError(f"{path}.{field}: required field missing")
    value = obj[field]
    if not isinstance(value, kind):
        raise ConfigError(
            f"{path}.{field}: expected {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _check_keys(obj, allowed, path):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown field")


def _merge_section(defaults, overrides, path, types):
    out = dict(defaults)
    _check_keys(overrides, set(defaults), path)
    for key, value in overrides.items():
        kind = types.get(key, (int, float))
        if not isinstance(value, kind) or isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: bad type {type(value).__name__}")
        out[key] = value
    return out


def load_config(path, seed=None):
    """Parse and validate an experiment config, materializing all defaults."""
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a JSON object")
    _check_keys(obj, {"model", "variant", "data", "fit", "profile", "scan"}, "config")

    model = _require(obj, "model", str, "config")
    try:
        bundle = zoo.builtin(model)
    except ValueError as e:
        raise ConfigError(f"config.model: {e}") from None
    kind = obj.get("variant", "parameterised")
    if kind not in bundle.kinds():
        raise ConfigError(
            f"config.variant: '{kind}' not in {sorted(bundle.kinds())}"
        )

    data = _merge_section(
        {
            "n": bundle.n_default,
            "sigma": bundle.sigma_default,
            "measured": list(bundle.measured_default),
            "seed": 0,
        },
        obj.get("data", {}),
        "config.data",
        {"n": int, "seed": int, "measured": list, "sigma": (int, float)},
    )
    species = bundle.truth_network.species_names
    for name in data["measured"]:
        if name not in species:
            raise ConfigError(f"config.data.measured: unknown species '{name}'")

    fit_defaults = bundle.fit_defaults(kind)
    fit_defaults["jobs"] = 1
    fit = _merge_section(
        {**fit_defaults},
        obj.get("fit", {}),
        "config.fit",
        {"n_starts": int, "adam_iters": int, "restarts": int,
         "refit_adam_iters": int, "jobs": int, "lr": (int, float),
         "theta_scale": (int, float, list, tuple)},
    )
    if isinstance(fit.get("theta_scale"), list):
        fit["theta_scale"] = tuple(fit["theta_scale"])

    profile = _merge_section(
        {"param": bundle.profile_param, "points": 25},
        obj.get("profile", {}),
        "config.profile",
        {"param": str, "points": int},
    )
    if profile["param"] not in bundle.network(kind).parameters:
        raise ConfigError(
            f"config.profile.param: '{profile['param']}' is not a mechanistic "
            f"parameter of variant '{kind}'"
        )

    scan = obj.get("scan", {})
    _check_keys(scan, {"grid", "kinds", "seeds"}, "config.scan")
    scan = {
        "grid": scan.get("grid", [[bundle.n_default, bundle.sigma_default]]),
        "kinds": scan.get("kinds", [kind]),
        "seeds": scan.get("seeds"),
    }
    for k in scan["kinds"]:
        if k not in bundle.kinds():
            raise ConfigError(f"config.scan.kinds: unknown variant '{k}'")
    for cell in scan["grid"]:
        if not (isinstance(cell, list) and len(cell) == 2):
            raise ConfigError("config.scan.grid: entries must be [n, sigma] pairs")
    if scan["seeds"] is not None and not (
        isinstance(scan["seeds"], list)
        and all(isinstance(s, int) for s in scan["seeds"])
    ):
        raise ConfigError("config.scan.seeds: must be a list of integers")

    if seed is not None:
        data["seed"] = int(seed)
    return {
        "model": model,
        "variant": kind,
        "data": data,
        "fit": fit,
        "profile": profile,
        "scan": scan,
    }


# --- output helpers ------------------------------------------------------------


def _write(out_dir, name, text):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = (out / name).resolve()
    if out.resolve() not in target.parents:
        raise ConfigError(f"output name '{name}' escapes --out")
    target.write_text(text)
    return target


def _sidecar(config, **extra):
    return json.dumps(
        {"tool_version": VERSION, "config": config, **extra},
        indent=2,
        sort_keys=True,
        default=float,
    )


def _dataset(bundle, config):
    data = config["data"]
    return experiments.make_dataset(
        bundle, n=data["n"], sigma=data["sigma"], measured=data["measured"],
        seed=data["seed"],
    )


def _fit(bundle, config, dataset):
    fit = config["fit"]
    problem, objective, ensemble = experiments.fit_variant(
        bundle,
        config["variant"],
        dataset,
        seed=config["data"]["seed"],
        jobs=fit["jobs"],
        n_starts=fit["n_starts"],
        adam_iters=fit["adam_iters"],
        lr=fit["lr"],
        theta_scale=fit.get("theta_scale", 1.0),
    )
    return problem, objective, ensemble


def _require_accepted(ensemble):
    if not ensemble.accepted:
        raise NumericalError(
            "no fit reached the acceptance threshold; "
            "increase fit.n_starts or fit.adam_iters"
        )


# --- commands ------------------------------------------------------------------


@click.group()
def cli():
    """Reaction-network UDE modelling, fitting, and identifiability."""


@cli.command()
@click.argument("model")
@click.option("--variant", default="parameterised", show_default=True)
@click.option("--tspan", default=None, help="t0,t1 override")
@click.option("--params", "param_overrides", default=None,
              help="comma-separated name=value overrides")
@click.option("--out", "out_dir", default=".", show_default=True)
def simulate(model, variant, tspan, param_overrides, out_dir):
    """Simulate a built-in model (or a DSL file) and write the trajectory."""
    if os.path.exists(model) and model not in zoo.builtin_ids():
        try:
            net = parse_network(Path(model).read_text())
        except NetworkError as e:
            raise ConfigError(f"cannot parse '{model}': {e}") from None
        name = Path(model).stem
        if tspan is None:
            raise ConfigError("--tspan is required for DSL input")
    else:
        try:
            bundle = zoo.builtin(model)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        net = bundle.network(variant)
        name = f"{model}_{variant}"
        tspan = tspan or f"{bundle.tspan[0]},{bundle.tspan[1]}"

    try:
        t0, t1 = (float(v) for v in tspan.split(","))
    except ValueError:
        raise ConfigError(f"--tspan: expected 't0,t1', got '{tspan}'") from None

    values = dict(net.defaults)
    for pair in (param_overrides or "").split(","):
        if not pair:
            continue
        try:
            key, _, raw = pair.partition("=")
            values[key.strip()] = float(raw)
        except ValueError:
            raise ConfigError(f"--params: bad entry '{pair}'") from None
    missing = [p for p in net.parameters if p not in values]
    if missing:
        raise ConfigError(f"--params: no value for {', '.join(missing)}")
    if net.neural_order:
        raise ConfigError("simulate only supports fully mechanistic variants")

    params = np.array([values[p] for p in net.parameters])
    u0 = np.array([net.initial.get(s.name, 0.0) for s in net.species])
    try:
        traj = integrate(assemble_rhs(net), u0, (t0, t1), params)
    except IntegrationError as e:
        raise NumericalError(str(e)) from None
    _write(out_dir, f"{name}_trajectory.csv", traj.to_csv(net.species_names))
    _write(
        out_dir,
        f"{name}_trajectory.json",
        _sidecar(
            {"model": model, "variant": variant, "tspan": [t0, t1],
             "params": {p: values[p] for p in net.parameters}},
        ),
    )
    click.echo(f"trajectory over [{t0}, {t1}] with {len(traj.times)} steps")


@cli.command()
@click.argument("model")
@click.option("--n", type=int, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--measure", default=None, help="comma-separated species names")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", default=".", show_default=True)
def generate(model, n, sigma, measure, seed, out_dir):
    """Generate a noisy synthetic dataset from a model's ground truth."""
    try:
        bundle = zoo.builtin(model)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    measured = (
        [s.strip() for s in measure.split(",")] if measure
        else list(bundle.measured_default)
    )
    for name in measured:
        if name not in bundle.truth_network.species_names:
            raise ConfigError(f"--measure: unknown species '{name}'")
    try:
        data = experiments.make_dataset(
            bundle, n=n, sigma=sigma, measured=measured, seed=seed
        )
    except (IntegrationError, ValueError) as e:
        raise NumericalError(str(e)) from None
    _write(out_dir, f"{model}_data.csv", data.to_csv())
    _write(out_dir, f"{model}_data.json", data.to_json())
    click.echo(f"{len(data.times)} samples of {','.join(data.species)}")


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, default=None, help="override config.data.seed")
@click.option("--jobs", type=int, default=None, envvar="CRN_UDE_JOBS")
@click.option("--out", "out_dir", default=".", show_default=True)
def fit(config_path, seed, jobs, out_dir):
    """Multistart-fit one variant to synthetic data from the config."""
    config = load_config(config_path, seed)
    if jobs is not None:
        config["fit"]["jobs"] = jobs
    bundle = zoo.builtin(config["model"])
    dataset = _dataset(bundle, config)
    problem, objective, ensemble = _fit(bundle, config, dataset)
    prefix = f"{config['model']}_{config['variant']}"
    _write(out_dir, f"{prefix}_fit.csv", ensemble.to_csv())
    _write(
        out_dir,
        f"{prefix}_fit.json",
        _sidecar(
            config,
            threshold=ensemble.threshold,
            accepted=ensemble.accepted,
            runs=[r.to_dict() for r in ensemble.results],
        ),
    )
    _require_accepted(ensemble)
    click.echo(
        f"best loss {ensemble.best.loss:.6g}, "
        f"{len(ensemble.accepted)}/{len(ensemble.results)} accepted"
    )


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--param", default=None, help="override config.profile.param")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", default=".", show_default=True)
def profile(config_path, param, seed, out_dir):
    """Profile one mechanistic parameter around the multistart optimum."""
    config = load_config(config_path, seed)
    if param is not None:
        config["profile"]["param"] = param
    bundle = zoo.builtin(config["model"])
    kind = config["variant"]
    if config["profile"]["param"] not in bundle.network(kind).parameters:
        raise ConfigError(
            f"--param: '{config['profile']['param']}' is not a mechanistic "
            f"parameter of variant '{kind}'"
        )
    dataset = _dataset(bundle, config)
    problem, objective, ensemble = _fit(bundle, config, dataset)
    _require_accepted(ensemble)
    prof = experiments.profile_variant(
        bundle,
        kind,
        problem,
        objective,
        ensemble.best,
        param=config["profile"]["param"],
        seed=config["data"]["seed"],
        points=config["profile"]["points"],
        restarts=config["fit"]["restarts"],
        refit_adam_iters=config["fit"]["refit_adam_iters"],
        lr=config["fit"]["lr"],
        theta_scale=config["fit"].get("theta_scale", 1.0),
    )
    ci = confidence_interval(prof)
    width, open_flag = ci_width(prof)
    prefix = f"{config['model']}_{kind}_profile_{prof.param}"
    _write(out_dir, f"{prefix}.csv", prof.to_csv())
    _write(
        out_dir,
        f"{prefix}.json",
        _sidecar(
            config,
            param=prof.param,
            mle_value=prof.mle_value,
            mle_loss=prof.mle_loss,
            ci={"lo": ci.lo, "hi": ci.hi, "lo_open": ci.lo_open,
                "hi_open": ci.hi_open, "level": ci.level,
                "threshold": ci.threshold, "width": width, "open": open_flag},
        ),
    )
    tag = " (open)" if open_flag else ""
    click.echo(f"CI [{ci.lo:.6g}, {ci.hi:.6g}] width {width:.6g}{tag}")


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None, envvar="CRN_UDE_JOBS")
@click.option("--out", "out_dir", default=".", show_default=True)
def ensemble(config_path, seed, jobs, out_dir):
    """Fit an ensemble and export the accepted slot-rate functions."""
    config = load_config(config_path, seed)
    if jobs is not None:
        config["fit"]["jobs"] = jobs
    bundle = zoo.builtin(config["model"])
    dataset = _dataset(bundle, config)
    problem, objective, ens = _fit(bundle, config, dataset)
    _require_accepted(ens)
    er = experiments.ensemble_variant(bundle, config["variant"], ens)
    prefix = f"{config['model']}_{config['variant']}"
    _write(out_dir, f"{prefix}_ensemble.csv", er.to_csv())
    _write(
        out_dir,
        f"{prefix}_ensemble.json",
        _sidecar(config, mean_l2=er.mean_l2, n_accepted=int(er.values.shape[0])),
    )
    click.echo(f"{er.values.shape[0]} accepted fits, mean L2 {er.mean_l2:.6g}")


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None, envvar="CRN_UDE_JOBS")
@click.option("--out", "out_dir", default=".", show_default=True)
def scan(config_path, seed, jobs, out_dir):
    """Data-quality scan: all metrics over an (N, sigma) grid."""
    config = load_config(config_path, seed)
    if jobs is not None:
        config["fit"]["jobs"] = jobs
    bundle = zoo.builtin(config["model"])
    overrides = {
        k: config["fit"][k]
        for k in ("n_starts", "adam_iters", "lr", "restarts", "refit_adam_iters")
    }
    overrides["jobs"] = config["fit"]["jobs"]
    overrides["theta_scale"] = config["fit"].get("theta_scale", 1.0)
    result = data_quality_scan(
        bundle,
        config["scan"]["kinds"],
        [tuple(cell) for cell in config["scan"]["grid"]],
        seed=config["scan"]["seeds"] or config["data"]["seed"],
        fit_overrides=overrides,
    )
    _write(out_dir, f"{config['model']}_scan.csv", result.to_csv())
    _write(
        out_dir,
        f"{config['model']}_scan.json",
        _sidecar(config, n_cells=len(result.cells),
                 n_failed=sum(c.failed for c in result.cells)),
    )
    click.echo(f"{len(result.cells)} cells "
               f"({sum(c.failed for c in result.cells)} failed)")


@cli.command("check-structural")
@click.argument("config_path", type=click.Path())
@click.option("--d-stars", default="-0.5,0,0.25,0.9", show_default=True)
@click.option("--out", "out_dir", default=".", show_default=True)
def check_structural(config_path, d_stars, out_dir):
    """Verify the production/decay degeneracy on the truth support."""
    config = load_config(config_path)
    bundle = zoo.builtin(config["model"])
    try:
        values = [float(v) for v in d_stars.split(",")]
    except ValueError:
        raise ConfigError(f"--d-stars: bad list '{d_stars}'") from None
    param = config["profile"]["param"]
    net = bundle.truth_network
    d_true = float(bundle.truth_vector()[net.parameters.index(param)])
    traj = bundle.simulate_truth()
    vals = traj.states[:, net.species_index(bundle.slot_species)]
    report = structural_nonident_check(
        bundle.truth_slot_rate(),
        d_true,
        (float(vals.min()), float(vals.max())),
        values,
    )
    _write(
        out_dir,
        f"{config['model']}_structural.json",
        _sidecar(
            config,
            d_true=d_true,
            d_stars=list(report.d_stars),
            max_rhs_deviation=list(report.max_rhs_deviation),
            d_star_bound=report.d_star_bound,
            nonneg_violated=[bool(v) for v in report.nonneg_violated],
            ok=report.ok,
        ),
    )
    click.echo(
        f"max RHS deviation {float(np.max(report.max_rhs_deviation)):.3g}, "
        f"bound {report.d_star_bound:.6g}"
    )
    if not report.ok:
        raise NumericalError("RHS identity violated beyond 1e-12")


@cli.command("list-models")
def list_models():
    """List built-in models, their species, variants, and truth provenance."""
    for model_id in zoo.builtin_ids():
        bundle = zoo.builtin(model_id)
        species = ",".join(s.name for s in bundle.network(
            next(iter(bundle.variants))).species)
        kinds = ",".join(bundle.kinds())
        prov = "; ".join(f"{k}={v}" for k, v in bundle.provenance.items())
        click.echo(f"{model_id}: species [{species}] variants [{kinds}]")
        click.echo(f"  provenance: {prov}")


def run(argv) -> int:
    """Entry point returning an exit code (0 ok, 1 config, 2 numerical)."""
    try:
        cli.main(args=list(argv), prog_name="crn-ude", standalone_mode=False)
        return 0
    except (ConfigError, click.ClickException, click.exceptions.Abort) as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except NumericalError as e:
        click.echo(f"numerical failure: {e}", err=True)
        return 2
    except (IntegrationError, FloatingPointError) as e:
        click.echo(f"numerical failure: {e}", err=True)
        return 2


def main():  # console-script entry
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
