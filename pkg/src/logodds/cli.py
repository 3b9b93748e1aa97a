"""Command line: fit, eval, synth, regularize, simulate.

Every command writes its artifacts plus ``manifest.json`` under ``--out``.
Exit status is 0 on success, 1 on runtime or data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import itertools
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .baselines import XI_GRID, HomeWinRunner, OddsRunner, PoissonRunner
from .data import Dataset, DataError, annotate_promotions, parse_csv, season_of, split_by_dates
from .evaluation import StructuredRunner, ValidationReport, paired_t_test, temporal_validate, wilcoxon_signed_rank
from .model import MODEL_NAMES, Link, ModelState, named_spec, save_model
from .regularized import fit_regularized, tune_lambda, write_matrix
from .rng import SEED_ENV, default_seed, stream
from .season import simulate_season
from .synthetic import TRUTHS, SynthSpec, gen_truth, replicate_experiment, sample_matches
from .training import DEFAULT_RATES, Regime, TrainConfig, default_grid, fit_batch, grid_search, mean_outcome_loglik

BASELINES = ("home", "odds", "maher", "dixon-coles")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Six significant digits for console output."""
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, (list, tuple)):
        return "(" + ", ".join(fmt(v) for v in x) + ")"
    return str(x)


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _models(names: Sequence[str]) -> list[str]:
    bad = [n for n in names if n not in MODEL_NAMES]
    if bad or not names:
        raise UsageError(f"unknown model {', '.join(bad) or '(none)'}; valid names: {', '.join(MODEL_NAMES)}")
    return list(names)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(v):
    if isinstance(v, (dt.date, Path)):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def write_manifest(out: Path, args: argparse.Namespace, argv: Sequence[str], inputs: Sequence[str | Path] = ()) -> None:
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "func"}
    outputs = {p.name: _sha256(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": args.seed,
        "seed_env": SEED_ENV,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": outputs,
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _json_dump(path: Path, obj) -> None:
    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.floating, np.integer)):
            o = o.item()
        if isinstance(o, float) and not math.isfinite(o):
            return repr(o)
        return o

    path.write_text(json.dumps(clean(obj), indent=2) + "\n", encoding="utf-8")


def _load(path: str) -> Dataset:
    return annotate_promotions(parse_csv(path))


def _write_trace(path: Path, trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loglik", "grad_norm", "step"])
        for it, f, g, s in trace:
            w.writerow([it, repr(float(f)), repr(float(g)), repr(float(s))])


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args, out: Path) -> list[str]:
    _models([args.model])
    data = _load(args.data)
    train = data.subset(r for r in data.records if args.train_end is None or r.date < args.train_end)
    if not len(train):
        raise DataError("no matches before --train-end")
    spec = named_spec(args.model, args.link, data.n_teams)
    cfg = TrainConfig(max_iters=args.max_iters, tol=args.tol, seed=args.seed)
    fit = fit_batch(ModelState.initial(spec, args.seed), spec, train, cfg)
    save_model(fit.state, spec, out / "model.txt", data.teams.names)
    _write_trace(out / "trace.csv", fit.trace)
    final = fit.trace[-1]
    print(f"fitted {args.model} ({args.link}) on {len(train)} matches: loglik {fmt(final[1])}, "
          f"grad norm {fmt(final[2])}, {final[0]} iterations, converged={fit.converged}")
    return [args.data]


# ---------------------------------------------------------------------------
# eval


def _paired(reports: dict[str, ValidationReport]) -> list[dict]:
    rows = []
    for a, b in itertools.combinations(reports, 2):
        la = {r.match_id: -r.log_loss for r in reports[a].rows}
        lb = {r.match_id: -r.log_loss for r in reports[b].rows}
        ids = [k for k in la if k in lb and math.isfinite(la[k]) and math.isfinite(lb[k])]
        if len(ids) < 2:
            continue
        xa, xb = [la[k] for k in ids], [lb[k] for k in ids]
        t_g = paired_t_test(xa, xb, "greater")
        t_2 = paired_t_test(xa, xb, "two-sided")
        wx = wilcoxon_signed_rank(xa, xb, "two-sided")
        rows.append({
            "a": a, "b": b, "n": len(ids),
            "mean_loglik_diff": float(np.mean(np.subtract(xa, xb))),
            "t_statistic": t_g.statistic, "t_p_a_greater": t_g.p_value, "t_p_two_sided": t_2.p_value,
            "wilcoxon_p_two_sided": wx.p_value, "degenerate": t_g.degenerate,
        })
    return rows


def _tune_xi(train: Dataset, tune: Dataset) -> float:
    best, best_score = 0.0, -math.inf
    for xi in XI_GRID:
        runner = PoissonRunner("dixon-coles", xi)
        score = mean_outcome_loglik(runner(train, tune), tune)
        if score > best_score:
            best, best_score = xi, score
    return best


def cmd_eval(args, out: Path) -> list[str]:
    models = _models(args.model)
    unknown = [b for b in args.baselines if b not in BASELINES]
    if unknown:
        raise UsageError(f"unknown baseline {', '.join(unknown)}; valid: {', '.join(BASELINES)}")
    data = _load(args.data)
    if args.test_end is not None:
        data = data.subset(r for r in data.records if r.date <= args.test_end)
    train, tune, test = split_by_dates(data, args.tune_start, args.test_start, strict=True)
    history = train.concat(tune)
    regime = Regime(args.regime)
    reports: dict[str, ValidationReport] = {}
    summary: dict[str, dict] = {}
    first_state = None
    for name in models:
        spec = named_spec(name, args.link, data.n_teams)
        cfg = TrainConfig(learning_rate=args.rates[0], seed=args.seed)
        search = None
        if regime in (Regime.ONLINE, Regime.TWO_STAGE) and len(args.rates) > 1:
            search = grid_search(spec, train, tune, default_grid(args.rates, seed=args.seed), regime)
            cfg = search.best
        runner = StructuredRunner(spec, regime, cfg)
        rep = temporal_validate(runner, history, test, args.bootstrap, args.seed)
        reports[name] = rep
        summary[name] = {**rep.aggregates, "regime": regime.value, "learning_rate": cfg.learning_rate,
                         "grid": [[c.learning_rate, s] for c, s in search.report] if search else None}
        if first_state is None:
            first_state = (runner.state, spec)
    for name in args.baselines:
        if name == "home":
            runner = HomeWinRunner()
        elif name == "odds":
            runner = OddsRunner()
        else:
            xi = _tune_xi(train, tune) if name == "dixon-coles" else 0.0
            runner = PoissonRunner(name, xi)
        rep = temporal_validate(runner, history, test, args.bootstrap, args.seed)
        reports[name] = rep
        summary[name] = dict(rep.aggregates)
        if name == "home":
            # the deterministic rule's accuracy is the test home-win rate
            summary[name]["home_rule_accuracy"] = float(np.mean(test.outcomes == 0))

    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "match_id", "date", "home", "away", "p_win", "p_draw", "p_lose",
                    "observed", "log_loss", "brier", "correct"])
        for name, rep in reports.items():
            for r in rep.rows:
                p = r.prediction
                w.writerow([name, r.match_id, test.records[r.match_id].date.isoformat(),
                            data.teams.name(r.home), data.teams.name(r.away),
                            repr(p.p_win), repr(p.p_draw), repr(p.p_lose), r.observed.code,
                            repr(r.log_loss), repr(r.brier), int(r.correct)])
    comparisons = _paired(reports)
    _json_dump(out / "report.json", {"split": {"train": len(train), "tune": len(tune), "test": len(test)},
                                     "models": summary, "comparisons": comparisons})
    if first_state is not None and first_state[0] is not None:
        save_model(first_state[0], first_state[1], out / "model.txt", data.teams.names)

    print(f"train {len(train)}, tune {len(tune)}, test {len(test)} matches")
    for name, agg in summary.items():
        extra = f", K {fmt(agg['learning_rate'])}" if "learning_rate" in agg else ""
        print(f"{name:<14} mean log-loss {fmt(agg['mean_log_loss'])}  mean loglik {fmt(agg['mean_loglik'])}  "
              f"accuracy {fmt(agg['accuracy'])}  n {agg['n_cases']}  skipped {agg['n_skipped']}{extra}")
    for c in comparisons:
        print(f"{c['a']} vs {c['b']}: paired t one-sided p {fmt(c['t_p_a_greater'])}, "
              f"two-sided p {fmt(c['t_p_two_sided'])}, Wilcoxon two-sided p {fmt(c['wilcoxon_p_two_sided'])}")
    return [args.data]


# ---------------------------------------------------------------------------
# synth


def _truth(args):
    cls = TRUTHS[args.truth]
    if args.truth == "rank4":
        return cls(args.s1, args.s2)
    if args.truth == "elo":
        return cls(args.sd)
    return cls(args.mu, args.sigma)


def cmd_synth(args, out: Path) -> list[str]:
    models = _models(args.models)
    if args.reps < 2:
        raise UsageError("--reps must be at least 2")
    spec = SynthSpec(args.q, _truth(args), args.matches_per_pair, args.seed)
    res = replicate_experiment(spec, models, args.reps, args.seed, args.rates, args.workers)
    res.to_csv(out / "results.csv")
    tests = []
    base = models[0]
    for other in models[1:]:
        for metric in ("mean_loglik", "accuracy"):
            t = res.compare(other, base, metric, "greater")
            tests.append({"model": other, "baseline": base, "metric": metric, "alternative": "greater",
                          "statistic": t.statistic, "p_value": t.p_value, "n": t.n, "degenerate": t.degenerate})
    means = {m: {k: float(res.metric(m, k).mean()) for k in ("mean_loglik", "accuracy")} for m in models}
    _json_dump(out / "report.json", {"truth": args.truth, "reps": args.reps, "means": means, "wilcoxon": tests})
    for m in models:
        print(f"{m:<12} mean loglik {fmt(means[m]['mean_loglik'])}  accuracy {fmt(means[m]['accuracy'])}")
    for t in tests:
        flag = " (degenerate)" if t["degenerate"] else ""
        print(f"{t['model']} > {t['baseline']} on {t['metric']}: one-sided Wilcoxon p {fmt(t['p_value'])}{flag}")
    return []


# ---------------------------------------------------------------------------
# regularize


def cmd_regularize(args, out: Path) -> list[str]:
    inputs: list[str] = []
    if args.data:
        data = _load(args.data)
        train, tune, test = split_by_dates(data, args.tune_start, args.test_start, strict=True)
        names = data.teams.names
        inputs.append(args.data)
    else:
        rng = stream(args.seed)
        spec = SynthSpec(args.q, _truth(args), args.matches_per_pair, args.seed)
        truth = gen_truth(spec, rng)
        train = sample_matches(truth, spec.matches_per_pair, rng)
        tune = sample_matches(truth, spec.matches_per_pair, rng, train.records[-1].date + dt.timedelta(days=1), train.teams)
        test = sample_matches(truth, spec.matches_per_pair, rng, tune.records[-1].date + dt.timedelta(days=1), train.teams)
        names = train.teams.names
    grid = None if args.lambda_grid == "auto" else _floats(args.lambda_grid)
    search = tune_lambda(train, tune, args.link, args.eps, grid)
    # refit on train plus tune at the chosen lambda before testing
    q = max(train.n_teams, tune.n_teams, test.n_teams)
    final = fit_regularized(train.concat(tune), search.best.lam, args.link, args.eps, q)
    test_ll = final.mean_loglik(test) if len(test) else math.nan
    with open(out / "lambda_table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "tune_mean_loglik"])
        for lam, s in search.table:
            w.writerow([repr(lam), repr(s)])
    write_matrix(out / "matrix.csv", final.L, names)
    _json_dump(out / "report.json", {"link": args.link, "best_lambda": search.best.lam,
                                     "phi": final.phi, "test_mean_loglik": test_ll,
                                     "table": search.table})
    for lam, s in search.table:
        print(f"lambda {fmt(lam)}  tune mean loglik {fmt(s)}")
    print(f"best lambda {fmt(search.best.lam)}; test mean loglik {fmt(test_ll)}")
    return inputs


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args, out: Path) -> list[str]:
    _models([args.model])
    data = _load(args.data)
    season = [r for r in data.records if season_of(r.date) == args.season]
    if not season:
        raise DataError(f"no matches in season {args.season}")
    history = data.subset(r for r in data.records if r.date < season[0].date)
    season_data = data.subset(season)
    spec = named_spec(args.model, args.link, data.n_teams)
    runner = StructuredRunner(spec, args.regime, TrainConfig(learning_rate=args.learning_rate, seed=args.seed))
    preds = runner(history, season_data)
    ids = sorted({r.home for r in season} | {r.away for r in season}, key=data.teams.name)
    local = {t: k for k, t in enumerate(ids)}
    fixtures = [(local[r.home], local[r.away]) for r in season_data.records]
    dist = simulate_season(preds, fixtures, args.reps, args.seed, [data.teams.name(t) for t in ids])
    dist.to_csv(out / "ranks.csv")
    text = dist.summary()
    (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return [args.data]


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logodds", description="Structured log-odds models for match outcomes.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data_required=True):
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help=f"base seed (default: ${SEED_ENV} or built-in)")
        if data_required is not None:
            sp.add_argument("--data", required=data_required, help="football-data.co.uk style CSV")

    names = ", ".join(MODEL_NAMES)
    links = [l.value for l in Link]

    sp = sub.add_parser("fit", help="maximum-likelihood fit on matches before --train-end")
    common(sp)
    sp.add_argument("--model", default="elo", help=f"one of: {names}")
    sp.add_argument("--link", default="ternary", choices=links)
    sp.add_argument("--train-end", type=_date, default=None)
    sp.add_argument("--max-iters", type=int, default=5000)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("eval", help="tune on train/tune, evaluate prequentially on test")
    common(sp)
    sp.add_argument("--model", type=_csv_list, default=["elo-home"], help=f"comma list of: {names}")
    sp.add_argument("--link", default="ternary", choices=links)
    sp.add_argument("--regime", default="two-stage", choices=[r.value for r in Regime])
    sp.add_argument("--tune-start", type=_date, default=dt.date(2005, 1, 1))
    sp.add_argument("--test-start", type=_date, default=dt.date(2010, 1, 5))
    sp.add_argument("--test-end", type=_date, default=None)
    sp.add_argument("--rates", type=_floats, default=list(DEFAULT_RATES), help="learning-rate grid")
    sp.add_argument("--baselines", type=_csv_list, default=[], help=f"comma list of: {', '.join(BASELINES)}")
    sp.add_argument("--bootstrap", type=int, default=5000)
    sp.set_defaults(func=cmd_eval)

    def truth_args(sp):
        sp.add_argument("--truth", default="rank2", choices=sorted(TRUTHS))
        sp.add_argument("--q", type=int, default=47)
        sp.add_argument("--matches-per-pair", type=int, default=4)
        sp.add_argument("--mu", type=float, default=1.0)
        sp.add_argument("--sigma", type=float, default=0.7)
        sp.add_argument("--s1", type=float, default=25.0)
        sp.add_argument("--s2", type=float, default=24.0)
        sp.add_argument("--sd", type=float, default=0.8)

    sp = sub.add_parser("synth", help="paired synthetic replication experiment")
    common(sp, data_required=None)
    truth_args(sp)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--models", type=_csv_list, default=["elo", "twofactor"])
    sp.add_argument("--rates", type=_floats, default=list(DEFAULT_RATES))
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("regularize", help="nuclear-norm regularized log-odds estimate")
    common(sp, data_required=False)
    truth_args(sp)
    sp.add_argument("--link", default="binary", choices=["binary", "ternary"])
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--lambda-grid", default="auto", help="'auto' or comma-separated values")
    sp.add_argument("--tune-start", type=_date, default=dt.date(2005, 1, 1))
    sp.add_argument("--test-start", type=_date, default=dt.date(2010, 1, 5))
    sp.set_defaults(func=cmd_regularize)

    sp = sub.add_parser("simulate", help="Monte Carlo final-table distribution for one season")
    common(sp)
    sp.add_argument("--season", type=int, required=True, help="calendar year in which the season starts")
    sp.add_argument("--reps", type=int, default=10_000)
    sp.add_argument("--model", default="elo-home", help=f"one of: {names}")
    sp.add_argument("--link", default="ternary", choices=["binary", "ternary"])
    sp.add_argument("--regime", default="two-stage", choices=[r.value for r in Regime])
    sp.add_argument("--learning-rate", type=float, default=0.1)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    if args.seed is None:
        args.seed = default_seed()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        inputs = args.func(args, args.out)
        write_manifest(args.out, args, argv, inputs)
    except UsageError as exc:
        parser.error(str(exc))
    except (DataError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
