"""Command-line front end: score, eval, select, synth.

Every subcommand is deterministic given its flags (plus the seed where one
applies), writes exactly one output file per path flag, and reports failures
as a single machine-parsable line on stderr with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .core import DsevalError, EvalSet, Origin, SampleRecord, build_eval_set
from .dsmetrics import (
    DEFAULT_K_BINS,
    DEFAULT_T_GRID,
    ThresholdGrid,
    ds_aurc,
    ds_f1,
)
from .ingest import (
    AURC_SCALE,
    METRIC_SCALE,
    MetricReport,
    load_features,
    load_logits,
    load_scores,
    scaled,
    write_curve,
    write_report,
    write_scores,
)
from .metrics_single import (
    aupr,
    auroc,
    aurc,
    best_f1_single,
    fpr_at_tpr,
    risk_coverage_curve,
)
from .oracle import DEFAULT_CAP, oracle_ds_aurc, oracle_ds_f1
from .scoring import (
    build_feature_bank,
    default_k,
    default_pca_dim,
    energy,
    fit_class_templates,
    fit_gaussian_stats,
    fit_principal_subspace,
    fit_sirc_params,
    fit_vim_alpha,
    klm,
    knn_score,
    l1_feature_norm,
    mahalanobis,
    max_logit,
    msp,
    neg_entropy,
    residual_score,
    sirc_combine,
    softmax,
    vim,
)
from .selection import SelectionMode, apply_thresholds, select_thresholds, test_opt
from .synth import (
    config_from_dict,
    far_ood_config,
    generate,
    near_ood_config,
)

__all__ = ["main", "UsageError"]


class UsageError(DsevalError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line, machine-parsable
        print(f"dseval: error: UsageError: {message}", file=sys.stderr)
        raise SystemExit(2)


def _tool_block() -> dict:
    return {"name": "dseval", "version": __version__}


# ---------------------------------------------------------------------------
# score

# method -> (needs logits, needs features, needs fit logits, needs fit features)
_METHODS = {
    "msp": (True, False, False, False),
    "mls": (True, False, False, False),
    "energy": (True, False, False, False),
    "neg_entropy": (True, False, False, False),
    "klm": (True, False, True, False),
    "mds": (False, True, False, True),
    "knn": (False, True, False, True),
    "l1": (False, True, False, False),
    "residual": (False, True, False, True),
    "vim": (True, True, True, True),
    "sirc_msp_l1": (True, True, False, True),
    "sirc_msp_res": (True, True, False, True),
}


def _id_rows(records):
    return [r for r in records if r.origin is Origin.ID]


def _matrix(records, attr):
    return np.stack([getattr(r, attr) for r in records])


def _align(logit_records, feature_records):
    if len(logit_records) != len(feature_records):
        raise UsageError("logits and features files hold different sample counts")
    for lr, fr in zip(logit_records, feature_records):
        if lr.sample_id != fr.sample_id or lr.origin is not fr.origin:
            raise UsageError(
                f"logits/features row mismatch at sample {lr.sample_id!r}"
            )


def _cmd_score(args) -> int:
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    if not methods:
        raise UsageError("--method needs at least one method name")
    for m in methods:
        if m not in _METHODS:
            raise UsageError(
                f"unknown method {m!r}; choose from {', '.join(sorted(_METHODS))}"
            )
    if args.logits is None and args.features is None:
        raise UsageError("provide --logits and/or --features")

    logit_records = load_logits(args.logits) if args.logits else None
    feature_records = load_features(args.features) if args.features else None
    if logit_records is not None and feature_records is not None:
        _align(logit_records, feature_records)

    fits = args.fit or []
    if len(fits) > 2:
        raise UsageError("--fit may be given at most twice (logits fit, features fit)")
    fit_logits_path = fit_features_path = None
    if args.logits and args.features:
        fit_logits_path = fits[0] if len(fits) >= 1 else None
        fit_features_path = fits[1] if len(fits) >= 2 else None
    elif args.logits:
        fit_logits_path = fits[0] if fits else None
    else:
        fit_features_path = fits[0] if fits else None

    for m in methods:
        needs_l, needs_f, needs_fl, needs_ff = _METHODS[m]
        if needs_l and logit_records is None:
            raise UsageError(f"method {m!r} requires --logits")
        if needs_f and feature_records is None:
            raise UsageError(f"method {m!r} requires --features")
        if needs_fl and fit_logits_path is None:
            raise UsageError(f"method {m!r} requires a logits --fit file")
        if needs_ff and fit_features_path is None:
            raise UsageError(f"method {m!r} requires a features --fit file")

    base = logit_records if logit_records is not None else feature_records
    if logit_records is None and any(r.origin is Origin.ID for r in base):
        raise UsageError(
            "scores for ID rows need a correctness flag, which is derived from "
            "model predictions; provide --logits"
        )

    # fit artifacts, estimated on the ID rows of the fit split only
    templates = stats = bank = basis = alpha = None
    sirc = {}
    if fit_logits_path:
        fit_l = _id_rows(load_logits(fit_logits_path))
        if not fit_l:
            raise UsageError("logits fit file has no id rows")
        fit_logit_mat = _matrix(fit_l, "logits")
    if fit_features_path:
        fit_f = _id_rows(load_features(fit_features_path))
        if not fit_f:
            raise UsageError("features fit file has no id rows")
        fit_feature_mat = _matrix(fit_f, "features")
    if "klm" in methods:
        probs = np.stack([softmax(row) for row in fit_logit_mat])
        templates = fit_class_templates(probs, fit_logit_mat.argmax(axis=1))
    if "mds" in methods:
        stats = fit_gaussian_stats(fit_feature_mat, [r.label for r in fit_f])
    if "knn" in methods:
        bank = build_feature_bank(fit_feature_mat)
    if {"residual", "vim", "sirc_msp_res"} & set(methods):
        dim = args.pca_dim or default_pca_dim(fit_feature_mat.shape[1])
        basis = fit_principal_subspace(fit_feature_mat, dim)
    if "vim" in methods:
        alpha = fit_vim_alpha(fit_logit_mat, fit_feature_mat, basis)
    if "sirc_msp_l1" in methods:
        sirc["l1"] = fit_sirc_params([l1_feature_norm(f) for f in fit_feature_mat])
    if "sirc_msp_res" in methods:
        sirc["res"] = fit_sirc_params(
            [residual_score(f, basis) for f in fit_feature_mat]
        )

    def score_one(method: str, i: int) -> float:
        logits = logit_records[i].logits if logit_records else None
        feats = feature_records[i].features if feature_records else None
        if method == "msp":
            return msp(logits)
        if method == "mls":
            return max_logit(logits)
        if method == "energy":
            return energy(logits, temperature=args.temperature)
        if method == "neg_entropy":
            return neg_entropy(logits)
        if method == "klm":
            return klm(softmax(logits), templates)
        if method == "mds":
            return mahalanobis(feats, stats)
        if method == "knn":
            return knn_score(feats, bank, args.k or default_k(bank.size))
        if method == "l1":
            return l1_feature_norm(feats)
        if method == "residual":
            return residual_score(feats, basis)
        if method == "vim":
            return vim(logits, feats, basis, alpha)
        if method == "sirc_msp_l1":
            p = sirc["l1"]
            return sirc_combine(msp(logits), 1.0, l1_feature_norm(feats), p.a, p.b)
        if method == "sirc_msp_res":
            p = sirc["res"]
            return sirc_combine(
                msp(logits), 1.0, residual_score(feats, basis), p.a, p.b
            )
        raise AssertionError(method)

    records = []
    for i, rec in enumerate(base):
        try:
            channels = {m: score_one(m, i) for m in methods}
        except DsevalError as exc:
            raise type(exc)(f"method failed on sample {rec.sample_id!r}: {exc}")
        correct = None
        if rec.origin is Origin.ID:
            correct = bool(int(logit_records[i].logits.argmax()) == rec.label)
        records.append(SampleRecord(rec.sample_id, rec.origin, correct, channels))
    write_scores(build_eval_set(records), args.out)
    return 0


# ---------------------------------------------------------------------------
# eval


def _single_block(eval_set: EvalSet, channel: str, thresholds, k_bins: int) -> dict:
    f1, tau = best_f1_single(eval_set, channel, thresholds)
    points = risk_coverage_curve(eval_set, channel, thresholds)
    return {
        "f1": scaled(f1, METRIC_SCALE),
        "f1_threshold": tau,
        "aurc": scaled(aurc(points, k_bins), AURC_SCALE),
    }


def _cmd_eval(args) -> int:
    eval_set = load_scores(args.scores)
    grid = ThresholdGrid.quantile(
        eval_set, args.id_channel, args.ood_channel, t_grid=args.grid
    )
    axis = {args.id_channel: grid.id_thresholds, args.ood_channel: grid.ood_thresholds}
    single = {
        ch: _single_block(eval_set, ch, thresholds, args.bins)
        for ch, thresholds in axis.items()
    }

    ood_block = None
    if eval_set.n_ood > 0:
        col = eval_set.channel(args.ood_channel)
        id_scores = col[eval_set.is_id]
        ood_scores = col[~eval_set.is_id]
        ood_block = {
            "channel": args.ood_channel,
            "auroc": scaled(auroc(id_scores, ood_scores), METRIC_SCALE),
            "fpr_at_95": scaled(fpr_at_tpr(id_scores, ood_scores), METRIC_SCALE),
            "aupr": scaled(aupr(id_scores, ood_scores), METRIC_SCALE),
        }

    want_surface = args.surface is not None
    f1_result = ds_f1(
        eval_set, args.id_channel, args.ood_channel, grid, return_surface=want_surface
    )
    aurc_result = ds_aurc(
        eval_set, args.id_channel, args.ood_channel, grid, k_bins=args.bins
    )
    if want_surface:
        write_curve(f1_result.surface, args.surface)

    report = {
        "tool": _tool_block(),
        "dataset": {
            "n_id": eval_set.n_id,
            "n_ood": eval_set.n_ood,
            "id_accuracy": scaled(eval_set.id_accuracy, METRIC_SCALE),
        },
        "single": single,
        "ood_detection": ood_block,
        "double": {
            "id_channel": args.id_channel,
            "ood_channel": args.ood_channel,
            "ds_f1": scaled(f1_result.value, METRIC_SCALE),
            "best_pair": {
                "tau_id": f1_result.best_pair.tau_id,
                "tau_ood": f1_result.best_pair.tau_ood,
            },
            "ds_aurc": scaled(aurc_result.value, AURC_SCALE),
        },
        "config": {
            "scores": str(args.scores),
            "id_channel": args.id_channel,
            "ood_channel": args.ood_channel,
            "grid": args.grid,
            "bins": args.bins,
            "include_sentinel": True,
            "seed": None,
        },
        "scaling": {"metrics": METRIC_SCALE, "aurc": AURC_SCALE},
    }

    if args.oracle:
        if eval_set.n_total > DEFAULT_CAP:
            raise UsageError(
                f"--oracle cross-check is capped at {DEFAULT_CAP} samples"
            )
        exhaust = ThresholdGrid.exhaustive(eval_set, args.id_channel, args.ood_channel)
        fast_f1 = ds_f1(eval_set, args.id_channel, args.ood_channel, exhaust).value
        fast_aurc = ds_aurc(
            eval_set, args.id_channel, args.ood_channel, exhaust, k_bins=args.bins
        ).value
        ref_f1, _ = oracle_ds_f1(eval_set, args.id_channel, args.ood_channel)
        ref_aurc = oracle_ds_aurc(
            eval_set, args.id_channel, args.ood_channel, k_bins=args.bins
        )
        diff = max(abs(fast_f1 - ref_f1), abs(fast_aurc - ref_aurc))
        report["oracle_check"] = {
            "ds_f1": ref_f1,
            "ds_aurc": ref_aurc,
            "max_abs_diff": diff,
        }
        if diff > 1e-9:
            _write_out(report, args.out)
            raise DsevalError(f"oracle cross-check failed, max diff {diff}")

    _write_out(report, args.out)
    return 0


def _write_out(report: dict, out: str) -> None:
    fmt = "markdown" if str(out).endswith(".md") else "json"
    write_report(MetricReport(report), out, format=fmt)


# ---------------------------------------------------------------------------
# select

_MODE_FLAGS = {
    "id": SelectionMode.ID_ONLY,
    "ood": SelectionMode.OOD_ONLY,
    "double": SelectionMode.DOUBLE,
}


def _cmd_select(args) -> int:
    val_set = load_scores(args.val)
    test_set = load_scores(args.test)
    val_grid = ThresholdGrid.quantile(
        val_set, args.id_channel, args.ood_channel, t_grid=args.grid
    )
    test_grid = ThresholdGrid.quantile(
        test_set, args.id_channel, args.ood_channel, t_grid=args.grid
    )
    # all three modes run so the report can contrast single vs double transfer
    modes = {}
    for mode in SelectionMode:
        picked = select_thresholds(
            val_set, args.id_channel, args.ood_channel, mode, val_grid
        )
        transfer_f1, counts = apply_thresholds(
            test_set, args.id_channel, args.ood_channel, picked.frozen
        )
        opt = test_opt(test_set, args.id_channel, args.ood_channel, mode, test_grid)
        modes[mode.value] = {
            "frozen": {
                "tau_id": picked.frozen.tau_id,
                "tau_ood": picked.frozen.tau_ood,
            },
            "val_f1": scaled(picked.val_f1, METRIC_SCALE),
            "test_f1_transfer": scaled(transfer_f1, METRIC_SCALE),
            "test_f1_opt": scaled(opt.test_f1, METRIC_SCALE),
            "test_counts": {
                "ta": counts.ta,
                "fa": counts.fa,
                "fr": counts.fr,
                "accepted_total": counts.accepted_total,
                "accepted_id": counts.accepted_id,
                "accepted_ood": counts.accepted_ood,
            },
        }
    report = {
        "tool": _tool_block(),
        "dataset": {
            "val": {"n_id": val_set.n_id, "n_ood": val_set.n_ood},
            "test": {"n_id": test_set.n_id, "n_ood": test_set.n_ood},
        },
        "selection": {"primary_mode": _MODE_FLAGS[args.mode].value, "modes": modes},
        "config": {
            "val": str(args.val),
            "test": str(args.test),
            "id_channel": args.id_channel,
            "ood_channel": args.ood_channel,
            "grid": args.grid,
            "include_sentinel": True,
            "seed": None,
        },
        "scaling": {"metrics": METRIC_SCALE, "aurc": AURC_SCALE},
    }
    _write_out(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# synth


def _cmd_synth(args) -> int:
    if args.preset == "custom":
        if not args.config:
            raise UsageError("--preset custom requires --config")
        with open(args.config, "r", encoding="utf-8") as fh:
            config = config_from_dict(json.load(fh))
    else:
        if args.config:
            raise UsageError("--config is only valid with --preset custom")
        factory = far_ood_config if args.preset == "far" else near_ood_config
        config = factory(
            n_id=args.n_id, n_ood=args.n_ood, id_accuracy=args.acc, seed=args.seed
        )
    write_scores(generate(config), args.out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dseval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dseval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="compute post-hoc scores from logits/features")
    p.add_argument("--logits", help="logits CSV for the evaluation samples")
    p.add_argument("--features", help="features CSV for the evaluation samples")
    p.add_argument(
        "--fit",
        action="append",
        help="fit-split CSV; repeat for logits fit then features fit",
    )
    p.add_argument("--method", required=True, help="comma-separated method names")
    p.add_argument("--k", type=int, help="neighbor count for knn")
    p.add_argument("--pca-dim", type=int, help="principal subspace dimension")
    p.add_argument("--temperature", type=float, default=1.0, help="energy temperature")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="single and double-scoring metrics report")
    p.add_argument("--scores", required=True)
    p.add_argument("--id-channel", required=True)
    p.add_argument("--ood-channel", required=True)
    p.add_argument("--grid", type=int, default=DEFAULT_T_GRID)
    p.add_argument("--bins", type=int, default=DEFAULT_K_BINS)
    p.add_argument("--surface", help="also export the per-pair surface CSV here")
    p.add_argument("--out", required=True, help="report path (.md for markdown)")
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("select", help="pick thresholds on val, freeze, apply to test")
    p.add_argument("--val", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--id-channel", default="s_id")
    p.add_argument("--ood-channel", default="s_ood")
    p.add_argument("--mode", choices=sorted(_MODE_FLAGS), default="double")
    p.add_argument("--grid", type=int, default=DEFAULT_T_GRID)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("synth", help="write a seeded synthetic scores file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-id", type=int, default=1000)
    p.add_argument("--n-ood", type=int, default=1000)
    p.add_argument("--acc", type=float, default=0.75)
    p.add_argument("--preset", choices=["near", "far", "custom"], default="far")
    p.add_argument("--config", help="synth config JSON (with --preset custom)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dseval: error: UsageError: {exc}", file=sys.stderr)
        return 2
    except DsevalError as exc:
        print(f"dseval: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"dseval: error: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
