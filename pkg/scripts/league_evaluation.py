"""Temporal validation on a football-data.co.uk results file.

    python scripts/league_evaluation.py results.csv --out runs/league

Runs the two-stage Elo models next to the home-win and bookmaker baselines,
reruns Elo with covariates under quarterly retraining, and tests whether the
two-stage predictions have higher per-match log-likelihood (paired t-test).
"""

import argparse
import csv
import json
from pathlib import Path

from logodds.cli import main as cli
from logodds.evaluation import paired_t_test


def per_match_loglik(report_csv, model):
    with open(report_csv, newline="") as fh:
        return {int(r["match_id"]): -float(r["log_loss"]) for r in csv.DictReader(fh) if r["model"] == model}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data", type=Path)
    ap.add_argument("--out", type=Path, default=Path("runs/league"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--link", default="ternary", choices=["binary", "ternary", "skellam"])
    args = ap.parse_args()
    common = ["--data", str(args.data), "--link", args.link, "--seed", str(args.seed)]

    two, batch = args.out / "two_stage", args.out / "retrain"
    if cli(["eval", "--model", "elo-home,elo-cov", "--regime", "two-stage", "--baselines", "home,odds",
            "--out", str(two), *common]):
        raise SystemExit(1)
    if cli(["eval", "--model", "elo-cov", "--regime", "retrain", "--out", str(batch), *common]):
        raise SystemExit(1)

    models = json.loads((two / "report.json").read_text())["models"]
    print(f"\n{'model':<10} {'accuracy':>9} {'95% CI':>17} {'mean loglik':>12}")
    for name, m in models.items():
        lo, hi = m["accuracy_ci"]
        print(f"{name:<10} {m['accuracy']:>9.4f} [{lo:.4f}, {hi:.4f}] {m['mean_loglik']:>12.4f}")
    if "home_rule_accuracy" in models.get("home", {}):
        print(f"home-win rule accuracy {models['home']['home_rule_accuracy']:.4f}")

    a, b = per_match_loglik(two / "report.csv", "elo-cov"), per_match_loglik(batch / "report.csv", "elo-cov")
    ids = sorted(set(a) & set(b))
    t = paired_t_test([a[k] for k in ids], [b[k] for k in ids], "greater")
    print(f"elo-cov two-stage vs retrain: n={len(ids)} t={t.statistic:.3f} one-sided p={t.p_value:.3g}")


if __name__ == "__main__":
    main()
