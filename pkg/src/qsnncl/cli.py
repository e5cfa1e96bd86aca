"""Command-line entry point: ``qsnncl {run,search,report} --config FILE``.

Every flag can also come from the environment, ``QSNNCL_<FLAG>`` with dashes
turned into underscores (``QSNNCL_SEED``, ``QSNNCL_JOBS``, ``QSNNCL_OUT``,
``QSNNCL_SAMPLES_PER_CLASS``, ``QSNNCL_CONFIG``, ``QSNNCL_CHECKPOINT``).
Flags win over the environment.  Logs go to stderr; results go to files
under ``<out>/seed_<n>/``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import artifacts
from .config import ExperimentConfig, parse_config
from .data import load_mnist
from .errors import QsnnclError
from .network import build_model, classify_counts, load_checkpoint, response_counts
from .quant import format_name
from .scenario import memory_report, prepare_tasks, run_dynamic, run_nondynamic, summary
from .search import baseline_average, refine_parameters

log = logging.getLogger("qsnncl")

ENV_PREFIX = "QSNNCL_"


def _env(name, cast=str):
    value = os.environ.get(ENV_PREFIX + name)
    return None if value in (None, "") else cast(value)


def _load_data(cfg: ExperimentConfig):
    d = cfg.data
    return load_mnist(d.train_images, d.train_labels), load_mnist(d.test_images, d.test_labels)


def _meta(cfg: ExperimentConfig, seed: int) -> dict:
    return {
        "seed": seed,
        "weight_format": format_name(cfg.network.format),
        "num_excitatory": cfg.network.num_excitatory,
        "scenario": cfg.kind,
        "samples_per_class": cfg.scenario.samples_per_class,
    }


def _run_seed(cfg: ExperimentConfig, seed: int, train, test) -> dict:
    tasks = prepare_tasks(train, test, cfg.scenario, seed)
    model = build_model(cfg.network, cfg.lif, cfg.stdp, seed)
    out = cfg.output_dir / f"seed_{seed}"
    t0 = time.perf_counter()
    record = _meta(cfg, seed)
    if cfg.kind == "dynamic":
        model, m = run_dynamic(model, tasks)
        artifacts.write_text(out / "accuracy.csv", m.to_csv())
        acc_low = cfg.search.acc_low if cfg.search else 0.20
        record.update(summary(m, memory_report(model), acc_low))
    else:
        model, acc = run_nondynamic(model, tasks)
        rep = memory_report(model)
        record.update(accuracy=round(acc, 6), memory={
            "synapse_count": rep.synapse_count, "bits_per_weight": rep.bits_per_weight,
            "total_bits": rep.total_bits, "ratio_vs_32bit": rep.ratio_vs_32bit})
    artifacts.write_json(out / "summary.json", record)
    artifacts.write_checkpoint(out / "model.npz", model)
    log.info("seed %d finished in %.1fs", seed, time.perf_counter() - t0)
    return record


def _run_seed_job(args):
    return _run_seed(*args)


def cmd_run(cfg: ExperimentConfig, jobs: int) -> int:
    train, test = _load_data(cfg)
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cfg.seeds))) as pool:
            list(pool.map(_run_seed_job, [(cfg, s, train, test) for s in cfg.seeds]))
    else:
        for s in cfg.seeds:
            _run_seed(cfg, s, train, test)
    return 0


def cmd_search(cfg: ExperimentConfig, jobs: int) -> int:
    if cfg.search is None:
        raise QsnnclError("search needs a [search] section in the config")
    if cfg.kind != "dynamic":
        raise QsnnclError("search evaluates the dynamic scenario; set experiment.kind = 'dynamic'")
    train, test = _load_data(cfg)
    for seed in cfg.seeds:
        tasks = prepare_tasks(train, test, cfg.scenario, seed)
        sc = cfg.search
        measured = sc.baseline_avg is None
        if measured:
            fp_net = replace(cfg.network, weight_format="fp32")
            log.info("seed %d: measuring the full-precision baseline", seed)
            sc = replace(sc, baseline_avg=baseline_average(build_model(fp_net, cfg.lif, cfg.stdp, seed), tasks))
        model_in = build_model(cfg.network, cfg.lif, cfg.stdp, seed)
        try:
            result = refine_parameters(model_in, tasks, sc, jobs=jobs)
        except QsnnclError as exc:
            raise QsnnclError(f"seed {seed}: {exc}") from exc
        out = cfg.output_dir / f"seed_{seed}"
        artifacts.write_text(out / "evaluated_points.csv", artifacts.evaluated_points_csv(result.evaluated_points))
        artifacts.write_text(out / "accuracy.csv", result.best_matrix.to_csv())
        record = _meta(cfg, seed)
        record.update(
            chosen_w_decay=result.chosen_w_decay,
            chosen_threshold_term=result.chosen_threshold_term,
            feasible=result.feasible,
            note=None if result.feasible else "no feasible point, baseline returned",
            baseline_avg=round(sc.baseline_avg, 6),
            baseline_source=("full-precision dynamic run, same seed" if measured else "config"),
            acc_low=sc.acc_low,
            acc_loss=sc.acc_loss,
            grid_points=len(result.evaluated_points),
        )
        artifacts.write_json(out / "chosen.json", record)
        artifacts.write_json(out / "summary.json",
                             summary(result.best_matrix, memory_report(result.best_model), sc.acc_low))
        artifacts.write_checkpoint(out / "model.npz", result.best_model)
    return 0


def cmd_report(cfg: ExperimentConfig, checkpoint: Path) -> int:
    model = load_checkpoint(checkpoint)
    if model.neuron_labels is None:
        raise QsnnclError(f"{checkpoint} holds an unlabeled model")
    train, test = _load_data(cfg)
    seed = cfg.seeds[0]
    tasks = prepare_tasks(train, test, cfg.scenario, seed)
    per_class = []
    for c, idx in enumerate(tasks.test_by_class):
        counts = response_counts(model, [tasks.test_encoder(j) for j in idx])
        pred = classify_counts(counts, model.neuron_labels, model.label_classes)
        per_class.append(round(float(np.mean(pred == c)), 6))
    rep = memory_report(model)
    record = {
        "checkpoint": str(checkpoint),
        "seed": seed,
        "weight_format": format_name(model.format),
        "per_class_accuracy": per_class,
        "average": round(float(np.mean(per_class)), 6),
        "memory": {"synapse_count": rep.synapse_count, "bits_per_weight": rep.bits_per_weight,
                   "total_bits": rep.total_bits, "ratio_vs_32bit": rep.ratio_vs_32bit},
    }
    artifacts.write_json(cfg.output_dir / "report.json", record)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsnncl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (("run", "run the configured scenario"),
                       ("search", "grid-refine w_decay and theta_inc on a quantized model"),
                       ("report", "re-evaluate a checkpoint on the test set")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("--config", type=Path, default=_env("CONFIG", Path))
        p.add_argument("--seed", type=int, default=_env("SEED", int),
                       help="run this single seed instead of the config's list")
        p.add_argument("--jobs", type=int, default=_env("JOBS", int) or os.cpu_count() or 1)
        p.add_argument("--out", type=Path, default=_env("OUT", Path))
        p.add_argument("--samples-per-class", type=int, default=_env("SAMPLES_PER_CLASS", int))
        if verb == "report":
            p.add_argument("--checkpoint", type=Path, default=_env("CHECKPOINT", Path))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.config is None:
        log.error("--config is required (or set %sCONFIG)", ENV_PREFIX)
        return 2
    try:
        cfg = parse_config(args.config).with_overrides(
            seeds=None if args.seed is None else [args.seed],
            output_dir=args.out, samples_per_class=args.samples_per_class)
        jobs = max(1, args.jobs)
        if args.verb == "run":
            return cmd_run(cfg, jobs)
        if args.verb == "search":
            return cmd_search(cfg, jobs)
        if args.checkpoint is None:
            log.error("report needs --checkpoint (or %sCHECKPOINT)", ENV_PREFIX)
            return 2
        return cmd_report(cfg, args.checkpoint)
    except (QsnnclError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
