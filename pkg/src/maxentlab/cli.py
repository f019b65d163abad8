"""Command-line front end.

Subcommands: ``entropy-approx``, ``project``, ``fit``, ``diagnose``,
``sanov``.  Global flags: ``--seed``, ``--threads``, ``--output``,
``--config``.  Option precedence is flags over config file over defaults.

Exit codes: 0 ok, 2 input error, 3 infeasible, 4 boundary non-attainment,
5 identity failure.

All randomness flows from the single seed through named sub-streams, and
outputs are written atomically, so a run is reproducible byte-for-byte
from its configuration alone, at any thread count.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from . import identities as ident
from . import multinomial as mn
from . import sanov as sv
from .dist import (
    ConstraintSet,
    EmpiricalMeasure,
    FeatureSet,
    FiniteDistribution,
    moments,
    total_variation,
)
from .errors import (
    EmptyEvent,
    EnumerationCapExceeded,
    InputError,
    MaxentError,
)
from .expfam import ExpFamModel
from .jsonio import atomic_write_text, dump_json, load_json
from .projection import SolverOptions, Status, fit_log_loss, project_inequality

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_BOUNDARY = 4
EXIT_IDENTITY = 5

_STATUS_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.BOUNDARY_NONATTAINED: EXIT_BOUNDARY,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run's output (threads excluded: thread
    count never changes results, only wall time)."""

    command: str
    seed: int = 0
    output: str | None = None
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "output": self.output,
            "params": dict(self.params),
        }


def _require_args(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise InputError(
            "missing required option(s): " + ", ".join(f"--{n}" for n in missing)
        )


def _parse_n_grid(text: str) -> list[int]:
    """Comma list (``5000,10000``) or doubling span (``5000..80000``)."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if lo < 1 or hi < lo:
            raise InputError(f"bad n range {text!r}")
        grid = []
        n = lo
        while n <= hi:
            grid.append(n)
            n *= 2
        return grid
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise InputError(f"bad n grid {text!r}") from exc


def _emit(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(path, text)


def _load_distribution(path: str) -> FiniteDistribution:
    return FiniteDistribution.from_json(load_json(path))


def _load_features(path: str) -> FeatureSet:
    return FeatureSet.from_json(load_json(path))


def _load_constraints(path: str) -> ConstraintSet:
    return ConstraintSet.from_json(load_json(path))


def _solver_options(args) -> SolverOptions:
    if getattr(args, "solver_options", None):
        obj = load_json(args.solver_options)
        if not isinstance(obj, dict):
            raise InputError(f"{args.solver_options}: expected a JSON object")
        return SolverOptions.from_json(obj)
    return SolverOptions(seed=args.seed, trace=bool(getattr(args, "trace", False)))


def cmd_entropy_approx(args) -> int:
    _require_args(args, "alphabet-size", "n")
    grid = _parse_n_grid(args.n)
    rows = mn.entropy_approx_experiment(
        alphabet_size=args.alphabet_size,
        n_grid=grid,
        prior_mode=args.prior,
        trials=args.trials,
        seed=args.seed,
        threads=args.threads,
    )
    _emit(args.output, mn.experiment_csv(rows))
    for n in grid:
        errs0 = sorted(abs(r.err_zeroth) for r in rows if r.n == n)
        errs1 = sorted(abs(r.err_first) for r in rows if r.n == n)
        med0 = errs0[len(errs0) // 2]
        med1 = errs1[len(errs1) // 2]
        print(
            f"n={n}: median |err| zeroth={med0:.6g} first={med1:.6g} "
            f"({len(errs0)} trials)"
        )
    return EXIT_OK


def cmd_project(args) -> int:
    _require_args(args, "prior", "constraints")
    prior = _load_distribution(args.prior)
    constraints = _load_constraints(args.constraints)
    opts = _solver_options(args)
    result = project_inequality(prior, constraints, opts)
    _emit(args.output, dump_json(result.to_json()))
    return _STATUS_EXIT[result.status]


def cmd_fit(args) -> int:
    _require_args(args, "prior", "features")
    prior = _load_distribution(args.prior)
    features = _load_features(args.features)
    if (args.samples is None) == (args.data is None):
        raise InputError("provide exactly one of --samples or --data")
    if args.samples is not None:
        try:
            text = open(args.samples).read()
        except OSError as exc:
            raise InputError(f"{args.samples}: {exc.strerror or exc}") from exc
        labels = [line.strip() for line in text.splitlines() if line.strip()]
        if not labels:
            raise InputError(f"{args.samples}: no samples found")
        measure = EmpiricalMeasure.from_labels(prior.outcomes, labels)
        data = measure.to_distribution(prior.outcomes)
        sample_count = measure.n
    else:
        data = _load_distribution(args.data)
        sample_count = None
    opts = _solver_options(args)
    alpha = moments(data, features)
    projected = project_inequality(
        prior, ConstraintSet.equalities(features, alpha), opts
    )
    fitted = fit_log_loss(prior, features, data, opts)
    tv = total_variation(
        projected.model.to_distribution(), fitted.model.to_distribution()
    )
    report = {
        "alpha": alpha.tolist(),
        "sample_count": sample_count,
        "projection": projected.to_json(),
        "log_loss_fit": fitted.to_json(),
        "tv_distance": tv,
        "equivalence_tol": opts.equiv_tol,
        "prescriptions_agree": bool(tv <= opts.equiv_tol),
    }
    _emit(args.output, dump_json(report))
    return max(_STATUS_EXIT[projected.status], _STATUS_EXIT[fitted.status])


def _diagnose_from_files(args, opts: SolverOptions):
    prior = _load_distribution(args.prior)
    features = _load_features(args.features)
    data = _load_distribution(args.data)
    lam = np.zeros(features.dim)
    if args.model_lambda is not None:
        obj = load_json(args.model_lambda)
        if not isinstance(obj, list):
            raise InputError(f"{args.model_lambda}: expected a JSON array")
        lam = np.asarray(obj, dtype=float)
    model = ExpFamModel(prior, features, lam)
    star = project_inequality(
        prior, ConstraintSet.equalities(features, moments(data, features)), opts
    )
    reports = [
        ident.pythagorean(data, star, model),
        ident.robustness(data, star.model, model),
        ident.approximation_error_entropy(data, star),
        ident.pretend_data_identity(data, star, model),
    ]
    descriptor = {
        "mode": "files",
        "alphabet_size": len(prior),
        "num_features": features.dim,
    }
    return descriptor, reports


def cmd_diagnose(args) -> int:
    opts = _solver_options(args)
    blocks = []
    failures = []
    if args.random:
        suite = ident.run_identity_suite(args.instances, seed=args.seed)
        for descriptor, reports in suite:
            blocks.append(
                {
                    "instance": descriptor.to_json(),
                    "reports": [r.to_json() for r in reports],
                }
            )
            failures.extend(r.name for r in reports if not r.passed)
    else:
        for name in ("prior", "features", "data"):
            if getattr(args, name) is None:
                raise InputError(
                    "diagnose needs --random or --prior/--features/--data"
                )
        descriptor, reports = _diagnose_from_files(args, opts)
        blocks.append(
            {"instance": descriptor, "reports": [r.to_json() for r in reports]}
        )
        failures.extend(r.name for r in reports if not r.passed)
    out = {"instances": blocks, "failures": failures, "all_pass": not failures}
    _emit(args.output, dump_json(out))
    if failures:
        print(f"identity failures: {sorted(set(failures))}", file=sys.stderr)
        return EXIT_IDENTITY
    return EXIT_OK


def cmd_sanov(args) -> int:
    _require_args(args, "prior", "constraints", "n")
    prior = _load_distribution(args.prior)
    constraints = _load_constraints(args.constraints)
    opts = _solver_options(args)
    total = sv.num_compositions(args.n, len(prior))
    use_monte_carlo = args.monte_carlo
    if total > args.cap and not use_monte_carlo:
        raise InputError(
            f"{total} histograms exceed the cap of {args.cap}; "
            "pass --monte-carlo to estimate instead"
        )
    if use_monte_carlo:
        report = sv.monte_carlo_event(
            prior,
            constraints,
            args.n,
            trials=args.trials,
            seed=args.seed,
            opts=opts,
            threads=args.threads,
        )
    else:
        report = sv.enumerate_event(prior, constraints, args.n, opts, cap=args.cap)
    out = report.to_json()
    if args.nested is not None:
        inner = _load_constraints(args.nested)
        nested = sv.nested_relative_probability(
            prior, constraints, inner, args.n, opts, cap=args.cap
        )
        out["nested"] = nested.to_json()
    if args.curve is not None:
        n_list = _parse_n_grid(args.curve)
        curve = sv.gibbs_conditioning_curve(prior, constraints, n_list, opts, args.cap)
        curve_path = args.curve_output or (
            (args.output or "sanov") + ".curve.csv"
        )
        atomic_write_text(curve_path, sv.gibbs_curve_csv(curve))
        out["curve_file"] = curve_path
    _emit(args.output, dump_json(out))
    if report.empty_event and report.method is sv.Method.EXACT:
        return EXIT_OK
    return _STATUS_EXIT[report.projection.status]


def _apply_config_defaults(parser, args, config: dict):
    """Fill unset argparse values from the config file, keeping flag wins."""
    for key, value in config.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise InputError(f"config: unknown option {key!r}")
        if getattr(args, attr) is None:
            setattr(args, attr, value)


_DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "trials": 20,
    "instances": 100,
    "cap": sv.DEFAULT_ENUMERATION_CAP,
    "prior_mode": "dirichlet1",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxentlab",
        description=(
            "Exact probability calculations, information projections, and "
            "identity diagnostics over finite outcome spaces."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None, help="master 64-bit seed")
        p.add_argument(
            "--threads", type=int, default=None, help="worker threads (results identical)"
        )
        p.add_argument("--output", default=None, help="output file (default stdout)")
        p.add_argument("--config", default=None, help="JSON file with option defaults")
        p.add_argument(
            "--dump-config",
            default=None,
            help="write the fully resolved run configuration to this file",
        )

    p = sub.add_parser("entropy-approx", help="Stirling accuracy experiment")
    add_common(p)
    p.add_argument("--alphabet-size", type=int, default=None)
    p.add_argument("--n", default=None, help="comma list or doubling span a..b")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument(
        "--prior",
        choices=[m.value for m in mn.PriorMode],
        default=None,
        help="distribution prior for sampled P",
    )
    p.set_defaults(func=cmd_entropy_approx)

    p = sub.add_parser("project", help="information projection onto constraints")
    add_common(p)
    p.add_argument("--prior", default=None, help="distribution JSON file")
    p.add_argument("--constraints", default=None, help="constraint-set JSON file")
    p.add_argument("--solver-options", default=None, help="solver options JSON file")
    p.add_argument("--trace", action="store_true", help="record per-iteration trace")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fit", help="fit by log loss and by projection; compare")
    add_common(p)
    p.add_argument("--prior", default=None)
    p.add_argument("--features", default=None)
    p.add_argument("--samples", default=None, help="newline-delimited outcome labels")
    p.add_argument("--data", default=None, help="explicit empirical distribution JSON")
    p.add_argument("--solver-options", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="run the identity diagnostics suite")
    add_common(p)
    p.add_argument("--random", action="store_true", help="seeded random instances")
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--prior", default=None)
    p.add_argument("--features", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--model-lambda", default=None, help="JSON array of parameters")
    p.add_argument("--solver-options", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sanov", help="exact or Monte Carlo event analysis")
    add_common(p)
    p.add_argument("--prior", default=None, help="sampling distribution JSON file")
    p.add_argument("--constraints", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--monte-carlo", action="store_true")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--nested", default=None, help="inner constraint-set JSON file")
    p.add_argument("--curve", default=None, help="n grid for the conditioning curve")
    p.add_argument("--curve-output", default=None)
    p.set_defaults(func=cmd_sanov)
    return parser


def run_config(args) -> RunConfig:
    skip = {"func", "command", "seed", "output", "threads", "config", "dump_config"}
    params = {
        k: v for k, v in vars(args).items() if k not in skip and v is not None
    }
    return RunConfig(command=args.command, seed=args.seed, output=args.output, params=params)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            config = load_json(args.config)
            if not isinstance(config, dict):
                raise InputError(f"{args.config}: expected a JSON object")
            _apply_config_defaults(parser, args, config)
        for key, default in _DEFAULTS.items():
            if hasattr(args, key) and getattr(args, key) is None:
                setattr(args, key, default)
        if getattr(args, "prior", None) is None and args.command == "entropy-approx":
            args.prior = _DEFAULTS["prior_mode"]
        if args.dump_config is not None:
            atomic_write_text(args.dump_config, dump_json(run_config(args).to_json()))
        return args.func(args)
    except (EnumerationCapExceeded, EmptyEvent, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MaxentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
