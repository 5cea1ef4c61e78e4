"""Command-line front end for reproducible experiment runs.

Subcommands: simulate | train | shift-report | select-k | lodo | compare |
evaluate.  Every command reads a flat key-value config, echoes the resolved
config into the output directory, and writes deterministic CSV/JSON outputs;
the run timestamp is isolated in each report's metadata block.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import train_erm, train_groupdro, train_mixup
from .config import ExperimentConfig, render_config
from .core import PenaltyParams, train_gradframe
from .data import (
    Domain,
    DomainSet,
    GaussianSpec,
    SIM_SOURCE_BLOBS,
    SIM_TARGET_BLOBS,
    Standardization,
    apply_standardization,
    generate_gaussian_domain,
    load_csv_dataset,
    read_ordinal_column,
    save_csv_dataset,
    save_csv_domain,
)
from .errors import ConfigError, DataError, GradframeError, NumericError
from .evaluation import evaluate, lodo_cv_search, welch_t_one_tailed
from .model_io import load_model, save_model
from .nn import MlpModel
from .rng import derive_seed
from .shift import (
    ShiftReport,
    concept_shift_delta,
    covariate_shift_ratio,
    ks_two_sample,
    likelihood_difference,
    select_domain_count,
)
from .training import fit_minibatch


def _metadata(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "command": command,
        "seed": cfg.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _echo_config(cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.txt").write_text(render_config(cfg.values), encoding="utf-8")


def _simulate_source(cfg: ExperimentConfig, seed: int) -> DomainSet:
    source_boundary, _ = cfg.sim_boundaries()
    domains = []
    for domain_id, blobs in SIM_SOURCE_BLOBS.items():
        specs = [
            GaussianSpec(np.array(mean), var * np.eye(2), cfg.sim_points_per_blob)
            for mean, var in blobs
        ]
        domains.append(
            generate_gaussian_domain(
                domain_id, specs, source_boundary, derive_seed(seed, "data", domain_id)
            )
        )
    return DomainSet(tuple(domains))


def _simulate_target(cfg: ExperimentConfig, seed: int) -> Domain:
    _, target_boundary = cfg.sim_boundaries()
    specs = [
        GaussianSpec(np.array(mean), var * np.eye(2), cfg.sim_target_points_per_blob)
        for mean, var in SIM_TARGET_BLOBS
    ]
    return generate_gaussian_domain(
        "target", specs, target_boundary, derive_seed(seed, "data", "target")
    )


def _load_data(cfg: ExperimentConfig, seed: int) -> tuple[DomainSet, Domain | None]:
    """Source domains plus the optional evaluation target, standardized if configured."""
    if cfg.values["dataset.kind"] == "simulate":
        source = _simulate_source(cfg, seed)
        target = _simulate_target(cfg, seed)
    else:
        src_path = cfg.values["data.source_csv"].strip()
        if not src_path:
            raise ConfigError("config key 'data.source_csv' is required for dataset.kind=csv")
        source = load_csv_dataset(src_path, cfg.csv_schema())
        tgt_path = cfg.values["data.target_csv"].strip()
        target = None
        if tgt_path:
            target = load_csv_dataset(tgt_path, cfg.csv_schema()).pooled("target")
    if cfg.standardize:
        from .data import standardize as _standardize

        source = _standardize(source)
        if target is not None:
            target = apply_standardization(target, source.standardization)
    return source, target


def _train_method(cfg: ExperimentConfig, source: DomainSet, seed: int, n_jobs: int):
    train_cfg = cfg.train_config(seed=seed)
    method = cfg.method
    if method == "erm":
        return train_erm(source, train_cfg), None
    if method == "mixup":
        return train_mixup(source, train_cfg, cfg.mixup_config(seed)), None
    if method == "groupdro":
        return train_groupdro(source, train_cfg, eta=cfg.groupdro_eta), None
    model, fict = train_gradframe(
        source, cfg.penalties(), cfg.ascent_config(), train_cfg, n_jobs=n_jobs
    )
    return model, fict


def _save_scaler(stats: Standardization | None, out: Path) -> None:
    if stats is None:
        return
    lines = [
        " ".join("%.17g" % v for v in stats.mean),
        " ".join("%.17g" % v for v in stats.std),
    ]
    (out / "scaler.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_scaler(path: Path) -> Standardization:
    lines = path.read_text(encoding="utf-8").splitlines()
    return Standardization(
        mean=np.array([float(v) for v in lines[0].split()]),
        std=np.array([float(v) for v in lines[1].split()]),
    )


def cmd_simulate(cfg: ExperimentConfig, out: Path, n_jobs: int) -> int:
    _echo_config(cfg, out)
    source = _simulate_source(cfg, cfg.seed)
    target = _simulate_target(cfg, cfg.seed)
    save_csv_dataset(source, out / "source.csv")
    save_csv_domain(target, out / "target.csv")
    _write_json(
        out / "simulate.json",
        {
            "source_rows": sum(len(d) for d in source.domains),
            "target_rows": len(target),
            "domains": [d.id for d in source.domains],
            "metadata": _metadata(cfg, "simulate"),
        },
    )
    return 0


def cmd_train(cfg: ExperimentConfig, out: Path, n_jobs: int) -> int:
    _echo_config(cfg, out)
    source, target = _load_data(cfg, cfg.seed)
    model, fict = _train_method(cfg, source, cfg.seed, n_jobs)
    save_model(model, out / "model.txt")
    _save_scaler(source.standardization, out)
    if fict is not None:
        fict.write_csv(out / "fictitious.csv")
    payload = {
        "method": cfg.method,
        "eval_source": evaluate(model, source.pooled()).to_payload(),
        "metadata": _metadata(cfg, "train"),
    }
    if target is not None:
        payload["eval_target"] = evaluate(model, target).to_payload()
    _write_json(out / "train_report.json", payload)
    return 0


def _single_shift_run(
    cfg: ExperimentConfig,
    source: DomainSet,
    gammas: PenaltyParams,
    seed: int,
    n_jobs: int,
) -> dict:
    train_cfg = cfg.train_config(seed=seed)
    model, fict = train_gradframe(source, gammas, cfg.ascent_config(), train_cfg, n_jobs=n_jobs)
    source_model = train_erm(source, train_cfg)
    ratios = covariate_shift_ratio(source, fict, source_model)
    deltas = concept_shift_delta(source, fict, train_cfg)
    fict_domain = fict.to_domain()
    fict_model = fit_minibatch(
        fict.feature_matrix(),
        fict.label_vector(),
        replace(train_cfg, seed=derive_seed(train_cfg.seed, "shift", "fict-model")),
    )
    likelihood = likelihood_difference(source_model, fict_model, fict_domain)
    source_x = source.pooled().feature_matrix()
    fict_x = fict.feature_matrix()
    ks_table = {
        f"x{j}": {
            "statistic": ks_two_sample(source_x[:, j], fict_x[:, j]).statistic,
            "p_value": ks_two_sample(source_x[:, j], fict_x[:, j]).p_value,
        }
        for j in range(source_x.shape[1])
    }
    return {
        "gamma1": gammas.gamma1,
        "gamma2": gammas.gamma2,
        "covariate_ratios": [float(v) for v in ratios],
        "concept_deltas": [float(v) for v in deltas],
        "likelihood_difference": float(likelihood),
        "ks_table": ks_table,
    }


def cmd_shift_report(cfg: ExperimentConfig, out: Path, n_jobs: int) -> int:
    _echo_config(cfg, out)
    source, _ = _load_data(cfg, cfg.seed)
    sweep_key = cfg.values["shift.sweep"].strip()
    base = cfg.penalties()
    runs = []
    if sweep_key:
        if sweep_key not in ("gamma1", "gamma2"):
            raise ConfigError("config key 'shift.sweep': expected gamma1 or gamma2")
        values = [float(v) for v in cfg.values["shift.sweep_values"].split(",")]
        for v in values:
            gammas = (
                PenaltyParams(v, base.gamma2)
                if sweep_key == "gamma1"
                else PenaltyParams(base.gamma1, v)
            )
            runs.append(_single_shift_run(cfg, source, gammas, cfg.seed, n_jobs))
    else:
        runs.append(_single_shift_run(cfg, source, base, cfg.seed, n_jobs))

    primary = runs[0]
    report = ShiftReport(
        covariate_ratios=primary["covariate_ratios"],
        concept_deltas=primary["concept_deltas"],
        mean_likelihood_difference=primary["likelihood_difference"],
        ks_results=primary["ks_table"],
        metadata=_metadata(cfg, "shift-report"),
    )
    payload = report.to_payload(config=dict(cfg.values))
    if len(runs) > 1:
        payload["sweep"] = runs
    _write_json(out / "shift_report.json", payload)
    with (out / "shift_series.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma1", "gamma2", "point_index", "covariate_ratio", "concept_delta"])
        for run in runs:
            for i, (r, d) in enumerate(zip(run["covariate_ratios"], run["concept_deltas"])):
                writer.writerow(
                    ["%.17g" % run["gamma1"], "%.17g" % run["gamma2"], i, "%.17g" % r, "%.17g" % d]
                )
    return 0


def cmd_select_k(cfg: ExperimentConfig, out: Path, n_jobs: int) -> int:
    _echo_config(cfg, out)
    if cfg.values["dataset.kind"] != "csv":
        raise ConfigError("select-k requires dataset.kind=csv with a key column")
    src_path = cfg.values["data.source_csv"].strip()
    schema = cfg.csv_schema()
    if schema.feature_columns is None:
        # keep the grouping key out of the feature matrix
        raise ConfigError("select-k requires explicit csv.feature_columns (excluding the key column)")
    source = load_csv_dataset(src_path, schema).pooled("all")
    keys = read_ordinal_column(src_path, cfg.values["select_k.key_column"])
    result = select_domain_count(
        source,
        cfg.select_k_candidates,
        keys,
        cfg.train_config(),
        m_samples=int(cfg.values["select_k.m_samples"]),
    )
    with (out / "k_table.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "avg_p_value"])
        for k in sorted(result.table):
            writer.writerow([k, "%.17g" % result.table[k]])
    _write_json(
        out / "selection.json",
        {
            "best_k": result.best_k,
            "flat_table": result.flat,
            "skipped": {str(k): v for k, v in result.skipped.items()},
            "table": {str(k): result.table[k] for k in sorted(result.table)},
            "metadata": _metadata(cfg, "select-k"),
        },
    )
    return 0


def cmd_lodo(cfg: ExperimentConfig, out: Path, n_jobs: int) -> int:
    _echo_config(cfg, out)
    source, _ = _load_data(cfg, cfg.seed)
    result = lodo_cv_search(source, cfg.grid_pairs(), cfg.ascent_config(), cfg.train_config())
    result.write_csv(out / "lodo_table.csv")
    _write_json(
        out / "lodo_choice.json",
        {
            "gamma1": result.best.gamma1,
            "gamma2": result.best.gamma2,
            "mean_auroc": result.mean_by_pair()[(result.best.gamma1, result.best.gamma2)],
            "metadata": _metadata(cfg, "lodo"),
        },
    )
    return 0


def cmd_compare(cfg: ExperimentConfig, out: Path, n_jobs: int) -> int:
    _echo_config(cfg, out)
    methods = [m.strip() for m in cfg.values["compare.methods"].split(",") if m.strip()]
    for m in methods:
        if m not in ("erm", "mixup", "groupdro", "gradframe"):
            raise ConfigError(f"compare.methods: unknown method {m!r}")
    seeds = cfg.seeds
    scores: dict[str, list[float]] = {m: [] for m in methods}
    for seed in seeds:
        source, target = _load_data(cfg, seed)
        if target is None:
            raise DataError("compare requires a target dataset")
        for m in methods:
            method_cfg = ExperimentConfig(values={**cfg.values, "method": m})
            model, _ = _train_method(method_cfg, source, seed, n_jobs)
            report = evaluate(model, target)
            if report.auroc is None:
                raise NumericError("target domain has a single class; AUROC undefined")
            scores[m].append(report.auroc)
    with (out / "compare_matrix.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "seed", "auroc"])
        for m in methods:
            for seed, score in zip(seeds, scores[m]):
                writer.writerow([m, seed, "%.17g" % score])
    tests = {}
    diagnostics = []
    if len(seeds) < 2:
        diagnostics.append("fewer than 2 seeds; t-tests skipped")
    else:
        for other in methods[1:]:
            t, dof, p = welch_t_one_tailed(scores[methods[0]], scores[other])
            tests[f"{methods[0]}_vs_{other}"] = {"t": t, "dof": dof, "p_one_tailed": p}
    _write_json(
        out / "compare_report.json",
        {
            "methods": methods,
            "seeds": seeds,
            "mean_auroc": {m: float(np.mean(scores[m])) for m in methods},
            "welch_tests": tests,
            "diagnostics": diagnostics,
            "metadata": _metadata(cfg, "compare"),
        },
    )
    return 0


def cmd_evaluate(cfg: ExperimentConfig, out: Path, n_jobs: int) -> int:
    _echo_config(cfg, out)
    model_path = out / "model.txt"
    if not model_path.exists():
        raise DataError(f"model file not found: {model_path}")
    model: MlpModel = load_model(model_path)
    eval_path = cfg.values["data.target_csv"].strip() or cfg.values["data.source_csv"].strip()
    if not eval_path:
        raise ConfigError("evaluate requires data.target_csv or data.source_csv")
    domain = load_csv_dataset(eval_path, cfg.csv_schema()).pooled("eval")
    scaler_path = out / "scaler.txt"
    if scaler_path.exists():
        domain = apply_standardization(domain, _load_scaler(scaler_path))
    _write_json(
        out / "eval_report.json",
        {
            "dataset": eval_path,
            "report": evaluate(model, domain).to_payload(),
            "metadata": _metadata(cfg, "evaluate"),
        },
    )
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "shift-report": cmd_shift_report,
    "select-k": cmd_select_k,
    "lodo": cmd_lodo,
    "compare": cmd_compare,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradframe",
        description="Distributionally robust training with worst-case fictitious data",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="flat key-value config file")
    parser.add_argument("--out", default=None, help="output directory (default: config output.dir)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--parallel", type=int, default=1, metavar="N", help="worker threads")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.out is not None:
            overrides["output.dir"] = args.out
        cfg = ExperimentConfig.load(args.config, overrides)
        out = Path(cfg.values["output.dir"])
        return COMMANDS[args.command](cfg, out, max(args.parallel, 1))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except GradframeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
