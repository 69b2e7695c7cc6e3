"""Command-line front end.

Subcommands: ``fit``, ``simulate``, ``replicate``, ``predict``.  Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.  Options can be
preloaded from a plain ``key=value`` file via ``--config``; explicit flags
always win over file values.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import io
from .criteria import build_report, posterior_summary
from .errors import DataError, DomainError, NumericalError
from .families import ModelKind
from .priors import DirichletPrior, PcPrior, RegressionPrior
from .sampler import MixtureConfig, SamplerConfig, predict, run_chain
from .simstudies import StudySpec, generate, replicate_and_score


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# Option names that may appear in a --config file, with their parsers.
_CONFIG_KEYS = {
    "iterations": int, "burn_in": int, "warmup_iters": int, "thin": int,
    "tau_t": float, "tau_s": float, "nu_t_start": float, "nu_s_start": float,
    "alpha": str, "tau0_sq": float, "a0": float, "b0": float, "mu0": float,
    "components": str, "pc_nu_star_t": float, "pc_xi_t": float,
    "pc_nu_star_s": float, "pc_xi_s": float,
}

_SAMPLER_DEFAULTS = {
    "iterations": 20_000, "burn_in": 4_000, "warmup_iters": 2_000, "thin": 1,
    "tau_t": 1.0, "tau_s": 0.5, "nu_t_start": 5.0, "nu_s_start": 2.0,
}


def _add_sampler_options(sub):
    for key in _SAMPLER_DEFAULTS:
        sub.add_argument("--" + key.replace("_", "-"),
                         type=_CONFIG_KEYS[key], default=None)
    sub.add_argument("--config", type=str, default=None,
                     help="key=value option file; flags override it")


def _add_prior_options(sub):
    sub.add_argument("--alpha", type=str, default=None,
                     help="Dirichlet concentrations, comma list or one value")
    sub.add_argument("--tau0-sq", type=float, default=None)
    sub.add_argument("--a0", type=float, default=None)
    sub.add_argument("--b0", type=float, default=None)
    sub.add_argument("--mu0", type=float, default=None)
    sub.add_argument("--components", type=str, default=None,
                     help="comma list among normal,student-t,slash")
    sub.add_argument("--pc-nu-star-t", type=float, default=None)
    sub.add_argument("--pc-xi-t", type=float, default=None)
    sub.add_argument("--pc-nu-star-s", type=float, default=None)
    sub.add_argument("--pc-xi-s", type=float, default=None)


def _load_config_file(path):
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](raw)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value {raw!r} for {key}")
    return values


def _effective(args, key, fallback=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    file_values = getattr(args, "_file_values", {})
    if key in file_values:
        return file_values[key]
    return _SAMPLER_DEFAULTS.get(key, fallback)


def _sampler_config(args, seed) -> SamplerConfig:
    return SamplerConfig(
        seed=seed,
        iterations=_effective(args, "iterations"),
        burn_in=_effective(args, "burn_in"),
        warmup_iters=_effective(args, "warmup_iters"),
        thin=_effective(args, "thin"),
        tau_t=_effective(args, "tau_t"),
        tau_s=_effective(args, "tau_s"),
        nu_t_start=_effective(args, "nu_t_start"),
        nu_s_start=_effective(args, "nu_s_start"),
    )


def _mixture_config(args) -> MixtureConfig:
    comp_raw = _effective(args, "components")
    components = (tuple(ModelKind.from_label(c) for c in comp_raw.split(","))
                  if comp_raw else
                  (ModelKind.NORMAL, ModelKind.STUDENT_T, ModelKind.SLASH))
    alpha_raw = _effective(args, "alpha")
    if alpha_raw is None:
        dirichlet = None
    else:
        parts = [float(v) for v in str(alpha_raw).split(",")]
        if len(parts) == 1:
            parts = parts * len(components)
        dirichlet = DirichletPrior(alpha=tuple(parts))
    regression = RegressionPrior(
        mu0=_effective(args, "mu0", 0.0),
        tau0_sq=_effective(args, "tau0_sq", 100.0),
        a0=_effective(args, "a0", 2.1),
        b0=_effective(args, "b0", 1.1))
    pc_t = pc_s = None
    if ModelKind.STUDENT_T in components and (
            _effective(args, "pc_nu_star_t") or _effective(args, "pc_xi_t")):
        pc_t = PcPrior.build(ModelKind.STUDENT_T,
                             nu_star=_effective(args, "pc_nu_star_t"),
                             xi=_effective(args, "pc_xi_t"))
    if ModelKind.SLASH in components and (
            _effective(args, "pc_nu_star_s") or _effective(args, "pc_xi_s")):
        pc_s = PcPrior.build(ModelKind.SLASH,
                             nu_star=_effective(args, "pc_nu_star_s"),
                             xi=_effective(args, "pc_xi_s"))
    return MixtureConfig(components=components, dirichlet=dirichlet,
                         regression=regression, pc_student_t=pc_t,
                         pc_slash=pc_s)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    covariates = [c.strip() for c in args.covariates.split(",") if c.strip()]
    if not covariates:
        raise UsageError("--covariates must name at least one column")
    data = io.read_dataset_csv(args.input, args.response, covariates,
                               censored_col=args.censored_col,
                               limit_col=args.limit_col)
    mixture = _mixture_config(args)
    config = _sampler_config(args, args.seed)
    output = run_chain(data, mixture, config)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_draws_csv(output, out_dir / "draws.csv")
    report = build_report(output, data, coef_names=covariates)

    summary = {
        "seed": args.seed,
        "response": args.response,
        "covariates": covariates,
        "components": [k.label for k in output.components],
        "rho": report["rho"],
        "selected_model": report["selected_model"],
        "summaries": report["summaries"],
        "accept_rate": report["accept_rate"],
        "warmup": {
            "nu_t_start": output.warmup.nu_t_start,
            "nu_s_start": output.warmup.nu_s_start,
            "tau_t": output.warmup.tau_t,
            "tau_s": output.warmup.tau_s,
            "accept_t": output.warmup.accept_t,
            "accept_s": output.warmup.accept_s,
        },
        "messages": output.messages,
    }
    io.write_json(summary, out_dir / "summary.json")
    io.write_json(report, out_dir / "criteria.json")

    lines = [f"selected model: {report['selected_model']}",
             "posterior model probabilities:"]
    for label, value in report["rho"].items():
        lines.append(f"  {label:>10}: {value:.4f}")
    lines.append("model-averaged posterior means:")
    for name, s in report["summaries"]["model_averaged"].items():
        if s is None:
            lines.append(f"  {name:>10}: -")
        else:
            lines.append(f"  {name:>10}: {s['mean']: .5f}  "
                         f"(95% HPD {s['hpd_low']: .5f} .. {s['hpd_high']: .5f})")
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n",
                                        encoding="utf-8")
    print("\n".join(lines))
    return 0


def cmd_simulate(args) -> int:
    kind = None
    nu = None
    if args.study == "I":
        if args.kind is None:
            raise UsageError("study I requires --kind")
        kind = ModelKind.from_label(args.kind)
        if kind is not ModelKind.NORMAL:
            if args.nu is None:
                raise UsageError(f"--nu is required for kind {kind.label}")
            nu = args.nu
    elif args.kind is not None or args.nu is not None:
        print(f"warning: study {args.study} fixes the error law; "
              "--kind/--nu are ignored", file=sys.stderr)
    spec = StudySpec(study=args.study, n=args.n, seed=args.seed, kind=kind,
                     nu=nu, replications=1)
    dataset, truth = generate(spec)
    io.write_dataset_csv(dataset, args.out)
    truth_path = args.truth_out or str(args.out) + ".truth.json"
    io.write_json(truth, truth_path)
    print(f"wrote {dataset.n} rows to {args.out} (truth: {truth_path})")
    return 0


def cmd_replicate(args) -> int:
    kind = ModelKind.from_label(args.kind) if args.kind else None
    spec = StudySpec(study=args.study, n=args.n, seed=args.seed, kind=kind,
                     nu=args.nu, replications=args.reps)
    mixture = _mixture_config(args)
    config = _sampler_config(args, args.seed)
    score = replicate_and_score(spec, mixture, config, n_jobs=args.parallel)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep_path = out_dir / "replications.csv"
    crit_cols = ["selected_waic", "selected_dic", "selected_eaic",
                 "selected_ebic", "selected_lpml"]
    fields = ["rep", "data_seed", "chain_seed", "rho_normal", "rho_student_t",
              "rho_slash", "selected", "sigma2_mean", "nu_t_mean", "nu_s_mean"]
    with open(rep_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        q = len(score.rows[0]["beta_mean"]) if score.rows else 0
        writer.writerow(fields[:3] + [f"beta_{j}_mean" for j in range(q)]
                        + fields[3:] + crit_cols)
        for row in score.rows:
            rec = [row["rep"], row["data_seed"], row["chain_seed"]]
            rec += [io.FLOAT_FMT % v for v in row["beta_mean"]]
            rec += [io.FLOAT_FMT % row["rho_normal"],
                    io.FLOAT_FMT % row["rho_student_t"],
                    io.FLOAT_FMT % row["rho_slash"], row["selected"],
                    io.FLOAT_FMT % row["sigma2_mean"],
                    "" if row["nu_t_mean"] is None else io.FLOAT_FMT % row["nu_t_mean"],
                    "" if row["nu_s_mean"] is None else io.FLOAT_FMT % row["nu_s_mean"]]
            rec += [row.get(c) or "" for c in crit_cols]
            writer.writerow(rec)

    summary = {
        "study": args.study,
        "n": args.n,
        "replications_requested": args.reps,
        "replications_completed": score.n_completed,
        "failures": score.failures,
        "mse_beta": score.mse_beta.tolist(),
        "mse_sigma2": score.mse_sigma2,
        "mse_nu": score.mse_nu,
        "mse_rho": score.mse_rho,
        "pct_correct": score.pct_correct,
        "pct_correct_by_criterion": score.pct_correct_by_criterion,
    }
    io.write_json(summary, out_dir / "replicate_summary.json")
    print(f"completed {score.n_completed}/{args.reps} replications; "
          f"pct correct selection: {score.pct_correct}")
    return 0


def cmd_predict(args) -> int:
    fit_dir = Path(args.fit)
    draws_path = fit_dir / "draws.csv"
    summary_path = fit_dir / "summary.json"
    if not draws_path.exists() or not summary_path.exists():
        raise UsageError(f"{fit_dir} does not look like a fit output "
                         "(draws.csv/summary.json missing)")
    output = io.read_draws_csv(draws_path)
    summary = io.read_json(summary_path)
    covariates = summary["covariates"]

    header, rows = io.read_table(args.input)
    missing = [c for c in covariates if c not in header]
    if missing:
        raise UsageError(f"{args.input}: missing covariate column(s) {missing};"
                         f" the fit used {covariates}")
    kind = None
    if args.conditional:
        kind = ModelKind.from_label(args.conditional)
        if not np.any(output.z_index == kind.value):
            raise DataError(f"model {kind.label!r} was never visited by the chain")

    rng = np.random.default_rng(args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "mean", "sd", "hpd_low", "hpd_high"])
        if rows:
            X_new = np.column_stack(
                [io.numeric_column(header, rows, c, args.input)
                 for c in covariates])
            for i in range(X_new.shape[0]):
                draws = predict(output, X_new[i], rng, kind=kind)
                s = posterior_summary(draws)
                writer.writerow([i, io.FLOAT_FMT % s.mean, io.FLOAT_FMT % s.sd,
                                 io.FLOAT_FMT % s.hpd_low,
                                 io.FLOAT_FMT % s.hpd_high])
    print(f"wrote predictive summaries for {len(rows)} rows to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="smnmix",
                     description="Bayesian model selection for heavy-tailed "
                                 "linear regression via a finite mixture of "
                                 "error laws")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the mixture model to a CSV dataset")
    fit.add_argument("--input", required=True)
    fit.add_argument("--response", required=True)
    fit.add_argument("--covariates", required=True,
                     help="comma-separated design column names (include the "
                          "intercept column explicitly)")
    fit.add_argument("--censored-col", default=None)
    fit.add_argument("--limit-col", default=None)
    fit.add_argument("--out", required=True)
    fit.add_argument("--seed", required=True, type=int)
    _add_sampler_options(fit)
    _add_prior_options(fit)
    fit.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="generate a synthetic study dataset")
    sim.add_argument("--study", required=True, choices=["I", "II", "III"])
    sim.add_argument("--kind", default=None)
    sim.add_argument("--nu", type=float, default=None)
    sim.add_argument("--n", required=True, type=int)
    sim.add_argument("--seed", required=True, type=int)
    sim.add_argument("--out", required=True)
    sim.add_argument("--truth-out", default=None)
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replicate", help="run replicated fits and score them")
    rep.add_argument("--study", required=True, choices=["I", "II", "III"])
    rep.add_argument("--kind", default=None)
    rep.add_argument("--nu", type=float, default=None)
    rep.add_argument("--n", required=True, type=int)
    rep.add_argument("--reps", required=True, type=int)
    rep.add_argument("--seed", required=True, type=int)
    rep.add_argument("--out", required=True)
    rep.add_argument("--parallel", type=int, default=1)
    _add_sampler_options(rep)
    _add_prior_options(rep)
    rep.set_defaults(func=cmd_replicate)

    pred = sub.add_parser("predict", help="posterior predictive summaries for "
                                          "new design rows")
    pred.add_argument("--fit", required=True)
    pred.add_argument("--input", required=True)
    pred.add_argument("--out", required=True)
    pred.add_argument("--seed", required=True, type=int)
    pred.add_argument("--conditional", default=None,
                      help="restrict to one model's draws")
    pred.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            args._file_values = _load_config_file(args.config)
        else:
            args._file_values = {}
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
