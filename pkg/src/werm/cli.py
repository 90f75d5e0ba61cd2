"""Command-line interface.

Subcommands: ``analytic``, ``biasgen``, ``weights``, ``train``,
``bounds``, ``experiment``.  Exit codes: 0 success, 2 validation error,
3 numeric error, 4 IO error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import biasgen, bounds as bounds_mod, experiment, train as train_mod, weights as weights_mod
from .core import (
    Dataset,
    NumericError,
    ValidationError,
    WermError,
    WeightVector,
    classification_metrics,
    write_csv,
)

__all__ = ["main", "build_parser"]


def _load_pk(path) -> tuple[float, ...]:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise ValidationError("pk file must hold a JSON list of probabilities")
    return tuple(float(v) for v in doc)


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _weights_from_flags(data: Dataset, mode: str, p, pk_file):
    if mode == "none":
        return WeightVector.ones(data.n), None
    if mode == "class":
        if p is None:
            raise ValidationError("--weights class needs --p")
        return weights_mod.class_shift_weights(data, weights_mod.TargetPrior(p=p)), None
    if mode == "strata":
        if pk_file is None:
            raise ValidationError("--weights strata needs --pk-file")
        prior = weights_mod.TargetPrior(pk=_load_pk(pk_file))
        return weights_mod.stratum_shift_weights(data, prior), None
    if mode == "pu":
        if p is None:
            raise ValidationError("--weights pu needs --p")
        return weights_mod.pu_weights(data, weights_mod.TargetPrior(p=p)), None
    if mode == "ipcw":
        if data.times is None:
            raise ValidationError("--weights ipcw needs t and e columns")
        km = weights_mod.km_fit(data.times, ~data.events)
        return weights_mod.ipcw_weights(data, km), km
    raise ValidationError(f"unknown weights mode {mode!r}")


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


def _cmd_analytic(args) -> None:
    if args.out is None:
        raise ValidationError("analytic needs --out")
    spec = experiment.ExperimentSpec(
        scenario="analytic_excess",
        synthetic={"p": args.p},
        out_dir=args.out,
        base_seed=args.seed,
    )
    bundle = experiment.run_experiment(spec)
    written = experiment.emit_results(bundle, args.out)
    _emit({"written": written})


def _cmd_biasgen(args) -> None:
    data, _ = experiment.ingest_csv(args.infile)
    spec = biasgen.BiasSpec(
        gamma=args.gamma,
        permutation="identity" if args.identity or args.perm_seed is None else "random",
        perm_seed=args.perm_seed,
        exponent_style=args.exponent_style,
    )
    out, p_prime = biasgen.apply_bias(
        data, spec, seed=args.seed, max_size=args.max_size
    )
    write_csv(out, args.outfile)
    _emit(
        {
            "p_prime": [float(v) for v in p_prime],
            "output_size": out.n,
            "input_size": data.n,
            "outfile": args.outfile,
        }
    )


def _cmd_weights(args) -> None:
    data, report = experiment.ingest_csv(args.infile)
    w, km = _weights_from_flags(data, args.mode, args.p, args.pk_file)
    w.to_csv(args.outfile)
    if km is not None and args.km_out:
        km.to_csv(args.km_out)
    _emit({"mode": args.mode, "n": data.n, "mean_weight": w.mean, "load": report})


def _cmd_train(args) -> None:
    train_data, _ = experiment.ingest_csv(args.train)
    test_data, _ = experiment.ingest_csv(args.test)
    J = max(train_data.n_classes or 2, test_data.n_classes or 2)
    train_data.n_classes = J
    test_data.n_classes = J
    w, _ = _weights_from_flags(train_data, args.weights, args.p, args.pk_file)
    cfg = train_mod.TrainConfig(
        lr=args.lr,
        momentum=args.momentum,
        weight_decay=args.wd,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
    )
    top_k = args.top_k if args.top_k is not None else min(5, J)
    params, log = train_mod.fit(
        train_data, w, args.model, cfg, eval_data=test_data, top_k=top_k
    )
    metrics = classification_metrics(
        test_data, train_mod.logits_batch(params, test_data.features), k=top_k
    )
    if args.curve:
        with open(args.curve, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "objective", "miss_rate", "top_k_error"])
            for row in log.rows():
                writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
    _emit(
        {
            "miss_rate": metrics["miss_rate"],
            "top_k_error": metrics["top_k_error"],
            "sce": metrics["mean_sce"],
            "top_k": top_k,
            "curve": args.curve,
        }
    )


def _cmd_bounds(args) -> None:
    inputs = bounds_mod.BoundInputs(
        n=args.n,
        delta=args.delta,
        epsilon=args.epsilon,
        L=args.L,
        phi_sup=args.phi_sup,
        p=args.p,
        max_pk=args.max_pk,
        K=args.K,
        rademacher=args.rademacher,
    )
    if args.kind in bounds_mod.DEVIATION_BOUND_KINDS:
        res = bounds_mod.deviation_bound(args.kind, inputs)
    else:
        res = bounds_mod.evaluate_bound(args.kind, inputs)
    _emit(
        {
            "kind": args.kind,
            "value": res.value,
            "valid": res.valid,
            "required_n": res.required_n,
            "terms": res.terms,
        }
    )


def _cmd_experiment(args) -> None:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    if args.seed is not None:
        doc["base_seed"] = args.seed
    if args.out is not None:
        doc["out_dir"] = args.out
    spec = experiment.ExperimentSpec.from_json(doc)
    bundle = experiment.run_experiment(spec)
    if spec.out_dir:
        written = experiment.emit_results(bundle, spec.out_dir)
    else:
        written = []
    summary = {
        "scenario": bundle["scenario"],
        "replicates": bundle["replicates"],
        "failures": bundle["failures"],
        "written": written,
    }
    if "modes" in bundle:
        summary["modes"] = {
            mode: {metric: vals["mean"] for metric, vals in by_metric.items()}
            for mode, by_metric in bundle["modes"].items()
        }
    _emit(summary)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="werm",
        description="Weighted empirical risk minimization with plug-in importance weights.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analytic", help="emit closed-form risk and excess-error curves")
    pa.add_argument("--p", type=float, default=0.3, help="test positive rate")
    pa.add_argument("--out", required=True, help="output directory")
    pa.add_argument("--seed", type=int, default=0)
    pa.set_defaults(func=_cmd_analytic)

    pb = sub.add_parser("biasgen", help="inject power-law strata bias into a CSV")
    pb.add_argument("--in", dest="infile", required=True)
    pb.add_argument("--out", dest="outfile", required=True)
    pb.add_argument("--gamma", type=float, required=True)
    group = pb.add_mutually_exclusive_group()
    group.add_argument("--identity", action="store_true", help="identity permutation")
    group.add_argument("--perm-seed", type=int, help="seed for a random permutation")
    pb.add_argument("--exponent-style", choices=biasgen.EXPONENT_STYLES, default="appendix")
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--max-size", type=int, default=None)
    pb.set_defaults(func=_cmd_biasgen)

    pw = sub.add_parser("weights", help="compute an importance-weight vector")
    pw.add_argument("--in", dest="infile", required=True)
    pw.add_argument("--out", dest="outfile", required=True)
    pw.add_argument("--mode", choices=("class", "strata", "pu", "ipcw"), required=True)
    pw.add_argument("--p", type=float)
    pw.add_argument("--pk-file", help="JSON list of test stratum probabilities")
    pw.add_argument("--km-out", help="also write the censoring survival curve CSV")
    pw.set_defaults(func=_cmd_weights)

    pt = sub.add_parser("train", help="weighted training and test evaluation")
    pt.add_argument("--train", required=True)
    pt.add_argument("--test", required=True)
    pt.add_argument("--model", choices=train_mod.MODEL_KINDS, default="linear")
    pt.add_argument(
        "--weights", choices=("none", "class", "strata", "pu", "ipcw"), default="none"
    )
    pt.add_argument("--p", type=float)
    pt.add_argument("--pk-file")
    pt.add_argument("--lr", type=float, default=0.001)
    pt.add_argument("--momentum", type=float, default=0.9)
    pt.add_argument("--wd", type=float, default=0.0)
    pt.add_argument("--batch", type=int, default=1000)
    pt.add_argument("--epochs", type=int, default=10)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--top-k", type=int, default=None)
    pt.add_argument("--curve", help="write the per-epoch learning curve CSV here")
    pt.set_defaults(func=_cmd_train)

    pd = sub.add_parser("bounds", help="evaluate a generalization or deviation bound")
    pd.add_argument(
        "--kind",
        required=True,
        choices=bounds_mod.EXCESS_BOUND_KINDS + bounds_mod.DEVIATION_BOUND_KINDS,
    )
    pd.add_argument("--n", type=int, required=True)
    pd.add_argument("--delta", type=float, required=True)
    pd.add_argument("--epsilon", type=float)
    pd.add_argument("--L", type=float, default=1.0)
    pd.add_argument("--p", type=float)
    pd.add_argument("--K", type=int)
    pd.add_argument("--max-pk", dest="max_pk", type=float)
    pd.add_argument("--phi-sup", dest="phi_sup", type=float)
    pd.add_argument("--rademacher", type=float, default=0.0)
    pd.set_defaults(func=_cmd_bounds)

    pe = sub.add_parser("experiment", help="run an experiment spec end to end")
    pe.add_argument("--config", help="JSON ExperimentSpec document")
    pe.add_argument("--seed", type=int, default=None, help="override base_seed")
    pe.add_argument("--out", default=None, help="override out_dir")
    pe.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except WermError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
