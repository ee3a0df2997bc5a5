"""Command-line surface: fit, fit-two, infer, select-aux, simulate.

Every subcommand is deterministic given --seed and writes only under its
--out / --out-dir target.  Exit codes: 0 success, 2 usage error, 3 missing
required flag, 4 unreadable path, 5 invalid data, 6 artifact/contract error,
1 unexpected failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .artifacts import (
    ArtifactError,
    ModelArtifact,
    halves_metadata,
    load_artifact,
    save_artifact,
)
from .data import DataValidationError, Dataset, DegenerateOutcomeError, load_dataset
from .estimators import (
    cross_fit_estimate,
    fit_multitask_group_lasso,
    fit_pooled,
    fit_single_outcome,
    fit_transfer_direct,
    multitask_pooled_rule,
    select_auxiliary_by_f1,
    two_dataset_estimate,
)
from .inference import decorrelated_test
from .simulation import ScenarioConfig, run_experiment_grid

__all__ = ["main", "entrypoint"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FLAG = 3
EXIT_UNREADABLE = 4
EXIT_BAD_DATA = 5
EXIT_CONTRACT = 6

FIT_METHODS = ("proposed", "baseline", "transfer-direct", "multitask1", "multitask2")


class _Parser(argparse.ArgumentParser):
    """Argument parser with distinct exit codes per usage-error class."""

    def error(self, message):
        self.print_usage(sys.stderr)
        code = EXIT_MISSING_FLAG if "required" in message else EXIT_USAGE
        self.exit(code, f"{self.prog}: error: {message}\n")


def _write_json(path, payload) -> None:
    import json

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load(args) -> Dataset:
    return load_dataset(args.data, args.target, args.aux or (),
                        remap01=args.remap01)


def _fit_rule(method: str, data: Dataset, folds: int, seed: int):
    """Returns (rule, metadata) for one registered fit method."""
    import warnings as _warnings

    meta: dict = {"seed": seed, "folds": folds, "timing": None}
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        if method == "proposed":
            fits = cross_fit_estimate(data, folds, split_seed=seed)
            meta["halves"] = halves_metadata(fits)
            meta["n"] = fits.n
            rule = fits.rule
        elif method == "baseline":
            from .estimators import _fit_outcome_rule

            rule, lam = _fit_outcome_rule(data, 0, folds)
            meta["lambda"] = lam
        elif method == "transfer-direct":
            rule = fit_transfer_direct(data, folds)
        elif method == "multitask1":
            rule = fit_multitask_group_lasso(data, folds)
        elif method == "multitask2":
            pooled = fit_pooled(data, tuple(range(data.n_outcomes)), folds)
            meta["pooled_lambda"] = pooled.lambda_chosen
            rule = multitask_pooled_rule(pooled)
        else:
            raise ValueError(f"unknown method {method!r}")
    meta["warnings"] = sorted({str(w.message) for w in caught
                               if issubclass(w.category, RuntimeWarning)})
    return rule, meta


def _column_meta(args) -> dict:
    return {"target": args.target, "aux": list(args.aux or ()),
            "remap01": bool(args.remap01)}


def _cmd_fit(args) -> int:
    data = _load(args)
    rule, meta = _fit_rule(args.method, data, args.folds, args.seed)
    meta["columns"] = _column_meta(args)
    save_artifact(args.out, ModelArtifact.from_rule(args.method, rule, meta))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_fit_two(args) -> int:
    small = load_dataset(args.small, args.target, args.aux or (),
                         remap01=args.remap01)
    large = load_dataset(args.large, args.target, args.aux or (),
                         remap01=args.remap01)
    import warnings as _warnings

    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        fits = two_dataset_estimate(large, small, args.folds,
                                    split_seed=args.seed)
    meta = {"seed": args.seed, "folds": args.folds, "timing": None,
            "halves": halves_metadata(fits), "n": fits.n,
            "columns": _column_meta(args),
            "warnings": sorted({str(w.message) for w in caught
                                if issubclass(w.category, RuntimeWarning)})}
    save_artifact(args.out, ModelArtifact.from_rule("two-dataset", fits.rule, meta))
    print(f"wrote {args.out}")
    return EXIT_OK


def _resolve_coordinate(token: str, data: Dataset) -> int:
    if data.feature_names and token in data.feature_names:
        return data.feature_names.index(token)
    try:
        j = int(token)
    except ValueError:
        raise DataValidationError(
            f"coordinate {token!r} is neither a feature name nor an index"
        ) from None
    if j < 0 or j >= data.p:
        raise DataValidationError(f"coordinate index {j} out of range [0, {data.p})")
    return j


def _cmd_infer(args) -> int:
    artifact = load_artifact(args.model)
    # column bindings come from the artifact unless overridden by flags
    columns = artifact.metadata.get("columns", {})
    target = args.target or columns.get("target")
    aux = args.aux or columns.get("aux", [])
    remap01 = args.remap01 or bool(columns.get("remap01", False))
    if not target:
        raise ArtifactError(
            f"{args.model}: artifact records no column bindings; "
            "pass --target (and --aux) explicitly"
        )
    data = load_dataset(args.data, target, aux, remap01=remap01)
    fits = artifact.half_fits()
    if len(artifact.beta) != data.p:
        raise ArtifactError(
            f"model has {len(artifact.beta)} coefficients but data has p={data.p}"
        )
    reports = {}
    for token in args.coordinate:
        j = _resolve_coordinate(token, data)
        rep = decorrelated_test(data, fits, j, args.folds)
        name = (data.feature_names[j] if data.feature_names else str(j))
        reports[name] = {
            "coordinate": rep.coordinate,
            "T": rep.statistic,
            "sigma_hat_sq": rep.sigma_hat_sq,
            "p_value": rep.p_value,
            "n_used": rep.n_used,
        }
    _write_json(args.out, {"seed": args.seed, "reports": reports})
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_select_aux(args) -> int:
    data = load_dataset(args.data, args.target, args.candidates,
                        remap01=args.remap01)
    chosen = select_auxiliary_by_f1(data, split_seed=args.seed, cv_folds=args.folds)
    if chosen is None:
        print("none")
    else:
        print(args.candidates[chosen - 1])
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = ScenarioConfig(scenario=args.scenario, design=args.design,
                            n=args.n, p=args.p, alpha=args.alpha,
                            n_test=args.n_test, replicate_seed=args.seed)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    table = run_experiment_grid([config], methods, args.replicates,
                                parallelism=args.jobs, cv_folds=args.folds)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.write_csv(out_dir / "results.csv")
    table.write_summary_json(out_dir / "summary.json")
    print(f"wrote {out_dir / 'results.csv'} and {out_dir / 'summary.json'}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="auxcal",
                     description="Classification with auxiliary binary outcomes")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p, with_data=True):
        if with_data:
            p.add_argument("--data", required=True)
        p.add_argument("--target", required=True)
        p.add_argument("--aux", action="append", default=[])
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--remap01", action="store_true",
                       help="accept {0,1} outcomes, mapping 0 to -1")

    p_fit = sub.add_parser("fit", help="fit one method and save the model")
    add_common(p_fit)
    p_fit.add_argument("--method", required=True, choices=FIT_METHODS)
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=_cmd_fit)

    p_two = sub.add_parser("fit-two",
                           help="pool on a large dataset, calibrate on a small one")
    p_two.add_argument("--small", required=True)
    p_two.add_argument("--large", required=True)
    add_common(p_two, with_data=False)
    p_two.add_argument("--out", required=True)
    p_two.set_defaults(func=_cmd_fit_two)

    p_inf = sub.add_parser("infer", help="score test for selected coordinates")
    p_inf.add_argument("--data", required=True)
    p_inf.add_argument("--model", required=True)
    p_inf.add_argument("--coordinate", action="append", required=True,
                       help="feature name or 0-based index (repeatable)")
    p_inf.add_argument("--seed", type=int, default=0)
    p_inf.add_argument("--folds", type=int, default=5)
    p_inf.add_argument("--out", required=True)
    p_inf.add_argument("--target", default=None,
                       help="override the target column recorded in the model")
    p_inf.add_argument("--aux", action="append", default=None)
    p_inf.add_argument("--remap01", action="store_true")
    p_inf.set_defaults(func=_cmd_infer)

    p_sel = sub.add_parser("select-aux",
                           help="screen auxiliary outcome columns by F1")
    p_sel.add_argument("--data", required=True)
    p_sel.add_argument("--target", required=True)
    p_sel.add_argument("--candidates", action="append", required=True)
    p_sel.add_argument("--folds", type=int, default=5)
    p_sel.add_argument("--seed", type=int, default=0)
    p_sel.add_argument("--remap01", action="store_true")
    p_sel.set_defaults(func=_cmd_select_aux)

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo cell")
    p_sim.add_argument("--scenario", type=int, required=True, choices=(1, 2))
    p_sim.add_argument("--design", type=int, required=True, choices=(1, 2))
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--p", type=int, required=True)
    p_sim.add_argument("--alpha", type=float, required=True)
    p_sim.add_argument("--n-test", type=int, default=10_000)
    p_sim.add_argument("--replicates", type=int, required=True)
    p_sim.add_argument("--methods", required=True,
                       help="comma-separated method names")
    p_sim.add_argument("--folds", type=int, default=5)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--jobs", type=int, default=1)
    p_sim.add_argument("--out-dir", required=True)
    p_sim.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"auxcal: cannot read path: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    except (DataValidationError, DegenerateOutcomeError) as exc:
        print(f"auxcal: invalid data: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except ArtifactError as exc:
        print(f"auxcal: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except ValueError as exc:
        print(f"auxcal: invalid data: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit nonzero
        print(f"auxcal: unexpected error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
