"""Command-line pipeline: design -> simulate -> fit -> validate -> predict -> exceed -> report.

Exit status: 0 on success, 2 on usage or configuration errors, 1 when a
computation fails. Diagnostics go to stderr; results go to files under
``--out``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .designs import DesignKind, DesignSpec, nested_design, unit_box
from .exceptions import ConfigError, MFGPError
from .gp import Dataset, loo_residuals, predict
from .inference import FitConfig, map_fit
from .io import (SCHEMA_VERSION, RunConfig, load_model, read_dataset, read_design,
                 read_json, read_points, read_table, save_model, write_dataset,
                 write_design, write_json, write_table)
from .kernels import Variant
from .risk import ExceedanceConfig, exceedance_posterior, kde_density
from .synthbench import SyntheticTruth, simulate_design

logger = logging.getLogger("mfgp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _box(cfg: RunConfig, d: int) -> np.ndarray:
    if cfg.box is None:
        return unit_box(d)
    box = np.asarray(cfg.box, dtype=float)
    if box.shape != (d, 2):
        raise ConfigError(f"box must have {d} rows of [lower, upper]")
    return box


def _require(cfg: RunConfig, name: str) -> str:
    value = getattr(cfg, name)
    if not value:
        raise ConfigError(f"--{name} is required for this command")
    return value


def _doc(kind: str, cfg: RunConfig, **payload) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **payload, "config": cfg.to_dict()}


# -- subcommands ---------------------------------------------------------------------

def cmd_design(cfg: RunConfig, out: Path):
    spec = DesignSpec(DesignKind(cfg.design_kind), tuple(cfg.levels), tuple(cfg.counts),
                      _box(cfg, cfg.dim), cfg.seed)
    design = nested_design(spec)
    write_design(out / "design.csv", design)
    logger.info("design: %d runs over levels %s", len(design), design.level_counts())


def cmd_simulate(cfg: RunConfig, out: Path):
    if cfg.design:
        design = read_design(cfg.design)
    else:
        spec = DesignSpec(DesignKind(cfg.design_kind), tuple(cfg.levels), tuple(cfg.counts),
                          _box(cfg, cfg.dim), cfg.seed)
        design = nested_design(spec)
    truth = SyntheticTruth(d=design.X.shape[1])
    z = simulate_design(design, cfg.seed, truth)
    write_dataset(out / "dataset.csv", Dataset(design.X, design.T, z))
    logger.info("simulated %d runs", len(design))


def _fit_config(cfg: RunConfig) -> FitConfig:
    return FitConfig(nu=cfg.nu, n_starts=cfg.n_starts, max_iter=cfg.max_iter, seed=cfg.seed,
                     method=cfg.optimizer, lambda_fraction=cfg.lambda_fraction,
                     within_variance=cfg.within_variance, shared_variance=cfg.shared_variance,
                     prediction_levels=(cfg.t_star,))


def cmd_fit(cfg: RunConfig, out: Path):
    ds = read_dataset(_require(cfg, "data"))
    result = map_fit(ds, Variant.parse(cfg.variant), _fit_config(cfg))
    extra = {
        "objective": result.report.objective,
        "parameters": dict(zip(result.layout.names, result.theta.tolist())),
        "optimizer": result.report.to_dict(),
        "config": cfg.to_dict(),
    }
    save_model(out / "model.json", result.model, extra)
    logger.info("fit %s: objective %.6g", cfg.variant, result.report.objective)


def cmd_validate(cfg: RunConfig, out: Path):
    model = load_model(_require(cfg, "model"))
    loo = loo_residuals(model)
    ds = model.dataset
    write_table(out / "loo.csv", {
        "row": np.arange(ds.n), "t": ds.T, "observed": ds.Z, "mean": loo.mean,
        "variance": loo.variance, "variance_observation": loo.variance_observation,
        "residual": loo.residual})
    summary = {"loo": {"residual_mean": float(np.mean(loo.residual)),
                       "residual_sd": float(np.std(loo.residual, ddof=1)), "n": ds.n}}
    if cfg.holdout:
        hold = read_dataset(cfg.holdout)
        pred = predict(model, hold.X, hold.T, observation_variance=True)
        resid = (hold.Z - pred.mean) / np.sqrt(pred.variance_observation)
        write_table(out / "holdout.csv", {
            "row": np.arange(hold.n), "t": hold.T, "observed": hold.Z, "mean": pred.mean,
            "variance": pred.variance_latent, "variance_observation": pred.variance_observation,
            "residual": resid})
        summary["holdout"] = {"residual_mean": float(np.mean(resid)),
                              "residual_sd": float(np.std(resid, ddof=1)), "n": hold.n,
                              "rmse": float(np.sqrt(np.mean((hold.Z - pred.mean) ** 2)))}
    write_json(out / "validation.json", _doc("validation", cfg, **summary))


def cmd_predict(cfg: RunConfig, out: Path):
    model = load_model(_require(cfg, "model"))
    X, T = read_points(_require(cfg, "points"), cfg.t_star)
    pred = predict(model, X, T, observation_variance=True)
    cols = {f"x{j + 1}": X[:, j] for j in range(X.shape[1])}
    write_table(out / "predictions.csv", {**cols, "t": T, "mean": pred.mean,
                                          "variance_latent": pred.variance_latent,
                                          "variance_observation": pred.variance_observation})


def cmd_exceed(cfg: RunConfig, out: Path):
    model = load_model(_require(cfg, "model"))
    ecfg = ExceedanceConfig(cfg.threshold, cfg.t_star, cfg.n_sim, cfg.n_pts,
                            _box(cfg, model.dataset.d), cfg.seed, cfg.grid_size)
    res = exceedance_posterior(model, ecfg)
    write_table(out / "p_samples.csv", {"replicate": np.arange(cfg.n_sim), "p": res.p_samples})
    dens = res.density
    if dens.is_point_mass:
        write_table(out / "density.csv", {"p": [dens.point_mass], "density": ["inf"]},
                    comment="point mass: every replicate gave the same probability")
    else:
        write_table(out / "density.csv", {"p": dens.grid, "density": dens.density})
    write_json(out / "exceed.json", _doc("exceedance", cfg, summary=res.summary(),
                                         bandwidth=dens.bandwidth))
    logger.info("exceedance: mean %.4g, 95%% interval [%.4g, %.4g]",
                res.mean, *res.interval95)


def _label(run_dir: Path) -> str:
    model_file = run_dir / "model.json"
    if model_file.exists():
        return read_json(model_file)["kernel"]["variant"]
    return run_dir.name


def cmd_report(cfg: RunConfig, out: Path):
    dirs = [Path(p) for p in (cfg.inputs or [str(out)])]
    pred_rows = {"model": [], "source": [], "observed": [], "predicted": [], "sd": [], "residual": []}
    resid_rows = {"model": [], "source": [], "x": [], "density": [], "normal_pdf": []}
    exc_rows = {"model": [], "p": [], "density": []}
    for run in dirs:
        label = _label(run)
        for source in ("holdout", "loo"):
            path = run / f"{source}.csv"
            if not path.exists():
                continue
            header, arr, _ = read_table(path)
            col = {h: arr[:, i] for i, h in enumerate(header)}
            m = arr.shape[0]
            pred_rows["model"] += [label] * m
            pred_rows["source"] += [source] * m
            pred_rows["observed"] += list(col["observed"])
            pred_rows["predicted"] += list(col["mean"])
            pred_rows["sd"] += list(np.sqrt(col["variance_observation"]))
            pred_rows["residual"] += list(col["residual"])
            r = col["residual"]
            grid = np.linspace(-4.0, 4.0, 161)
            kde = stats.gaussian_kde(r, bw_method="silverman") if np.ptp(r) > 0 else None
            resid_rows["model"] += [label] * grid.size
            resid_rows["source"] += [source] * grid.size
            resid_rows["x"] += list(grid)
            resid_rows["density"] += list(kde(grid) if kde else np.zeros_like(grid))
            resid_rows["normal_pdf"] += list(stats.norm.pdf(grid))
            break  # prefer held-out data when present
        ps = run / "p_samples.csv"
        if ps.exists():
            _, arr, _ = read_table(ps)
            dens = kde_density(arr[:, 1])
            if dens.is_point_mass:
                exc_rows["model"].append(label)
                exc_rows["p"].append(dens.point_mass)
                exc_rows["density"].append("inf")
            else:
                exc_rows["model"] += [label] * dens.grid.size
                exc_rows["p"] += list(dens.grid)
                exc_rows["density"] += list(dens.density)
    if not pred_rows["model"] and not exc_rows["model"]:
        raise ConfigError("no validation or exceedance artifacts found in the input directories")
    write_table(out / "fig1_predictions.csv", pred_rows)
    write_table(out / "fig1_residual_density.csv", resid_rows)
    write_table(out / "fig2_exceedance_density.csv", exc_rows)


COMMANDS = {
    "design": (cmd_design, "generate a nested multi-fidelity or LHS design"),
    "simulate": (cmd_simulate, "run the synthetic simulator on a design"),
    "fit": (cmd_fit, "MAP-fit a model to a dataset"),
    "validate": (cmd_validate, "leave-one-out (and optional hold-out) validation"),
    "predict": (cmd_predict, "posterior mean and variance at given points"),
    "exceed": (cmd_exceed, "posterior of the threshold-exceedance probability"),
    "report": (cmd_report, "tidy CSV tables for plotting"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="JSON run configuration")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("-v", "--verbose", action="store_true")
    o = common.add_argument_group("overrides")
    o.add_argument("--variant", choices=[v.value for v in Variant])
    o.add_argument("--nu", type=float, choices=[0.5, 1.5, 2.5])
    o.add_argument("--n-starts", dest="n_starts", type=int)
    o.add_argument("--max-iter", dest="max_iter", type=int)
    o.add_argument("--optimizer", choices=["L-BFGS-B", "Powell", "Nelder-Mead"])
    o.add_argument("--lambda-fraction", dest="lambda_fraction", type=float)
    o.add_argument("--t-star", dest="t_star", type=float)
    o.add_argument("--threshold", type=float)
    o.add_argument("--n-sim", dest="n_sim", type=int)
    o.add_argument("--n-pts", dest="n_pts", type=int)
    o.add_argument("--grid-size", dest="grid_size", type=int)
    o.add_argument("--design-kind", dest="design_kind", choices=["nested", "lhs"])
    o.add_argument("--levels", type=lambda s: s.split(","), help="comma list, e.g. 100,50,100/3,25")
    o.add_argument("--counts", type=lambda s: [int(c) for c in s.split(",")])
    o.add_argument("--dim", type=int)
    o.add_argument("--design")
    o.add_argument("--data")
    o.add_argument("--model")
    o.add_argument("--points")
    o.add_argument("--holdout")
    o.add_argument("--inputs", nargs="+", help="run directories to gather (report)")

    parser = _Parser(prog="mfgp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mfgp {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_)
    return parser


OVERRIDE_KEYS = ("seed", "out", "variant", "nu", "n_starts", "max_iter", "optimizer",
                 "lambda_fraction", "t_star", "threshold", "n_sim", "n_pts", "grid_size",
                 "design_kind", "levels", "counts", "dim", "design", "data", "model",
                 "points", "holdout", "inputs")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"mfgp: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        base = RunConfig.from_file(args.config) if args.config else RunConfig()
        cfg = base.merged({k: getattr(args, k) for k in OVERRIDE_KEYS})
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, TypeError) as exc:
        print(f"mfgp: configuration error: {exc}", file=sys.stderr)
        return 2
    func = COMMANDS[args.command][0]
    try:
        func(cfg, out)
    except ConfigError as exc:
        print(f"mfgp: configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"mfgp: {exc}", file=sys.stderr)
        return 2
    except (MFGPError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mfgp: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
