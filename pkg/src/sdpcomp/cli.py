"""Command-line entry point: generate, train, eval, sweep.

Exit codes are 0 on success, 1 for bad usage and 2 for runtime or data
errors. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    Correction,
    Estimator,
    NoiseRates,
    PairArrays,
    RiskSpec,
    SDPcompError,
    SingleClassTest,
    validate_pair_dataset,
)
from .datagen import GaussianMixtureSpec, LabeledSamples, PriorSide, generate_sdpc_pairs, sample_labeled
from .model import Scorer, parse_arch
from .train_eval import (
    REPORT_COLUMNS,
    EstimatedPrior,
    KnownPrior,
    TrainConfig,
    TrialReport,
    TrialSpec,
    accuracy,
    auc,
    run_trial,
    train,
)

SWEEP_COLUMNS = REPORT_COLUMNS + ("wall_seconds", "error")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# file formats


def _writer(handle):
    return csv.writer(handle, lineterminator="\n")


def pair_header(d: int) -> list:
    return ["s"] + [f"x{i}" for i in range(d)] + [f"xp{i}" for i in range(d)]


def test_header(d: int) -> list:
    return ["y"] + [f"x{i}" for i in range(d)]


def write_pairs_csv(path, pairs: PairArrays) -> None:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(pair_header(pairs.dim))
    for a, b, s in zip(pairs.first, pairs.second, pairs.sd):
        w.writerow([int(s)] + [repr(float(v)) for v in a] + [repr(float(v)) for v in b])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def write_test_csv(path, samples: LabeledSamples) -> None:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(test_header(samples.X.shape[1]))
    for x, y in zip(samples.X, samples.y):
        w.writerow([int(y)] + [repr(float(v)) for v in x])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], rows[1:]


def _sign(text: str, path, line: int) -> int:
    v = int(text)
    if v not in (-1, 1):
        raise ValueError(f"{path}:{line}: label must be -1 or +1, got {text}")
    return v


def read_pairs_csv(path) -> PairArrays:
    header, rows = _read_rows(path)
    if len(header) < 3 or (len(header) - 1) % 2 or header[0] != "s":
        raise ValueError(f"{path}: bad pair header")
    d = (len(header) - 1) // 2
    if header != pair_header(d):
        raise ValueError(f"{path}: bad pair header")
    if not rows:
        raise ValueError(f"{path}: no pairs")
    sd = np.empty(len(rows), dtype=np.int64)
    vals = np.empty((len(rows), 2 * d))
    for i, row in enumerate(rows):
        if len(row) != 1 + 2 * d:
            raise ValueError(f"{path}:{i + 2}: expected {1 + 2 * d} fields, got {len(row)}")
        sd[i] = _sign(row[0], path, i + 2)
        vals[i] = [float(v) for v in row[1:]]
    pairs = PairArrays(vals[:, :d], vals[:, d:], sd)
    validate_pair_dataset(pairs)
    return pairs


def read_test_csv(path) -> LabeledSamples:
    header, rows = _read_rows(path)
    d = len(header) - 1
    if d < 1 or header != test_header(d):
        raise ValueError(f"{path}: bad test header")
    if not rows:
        raise ValueError(f"{path}: no samples")
    y = np.empty(len(rows), dtype=np.int64)
    X = np.empty((len(rows), d))
    for i, row in enumerate(rows):
        if len(row) != 1 + d:
            raise ValueError(f"{path}:{i + 2}: expected {1 + d} fields, got {len(row)}")
        y[i] = _sign(row[0], path, i + 2)
        X[i] = [float(v) for v in row[1:]]
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{path}: non-finite feature")
    return LabeledSamples(X, y)


def _csv_line(values) -> str:
    buf = io.StringIO()
    _writer(buf).writerow(values)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument types


def _rate(text: str) -> float:
    v = float(text)
    if not (0.0 <= v < 1.0):
        raise argparse.ArgumentTypeError(f"rate must lie in [0, 1), got {text}")
    return v


def _unit(text: str) -> float:
    v = float(text)
    if not (0.0 <= v <= 1.0):
        raise argparse.ArgumentTypeError(f"value must lie in [0, 1], got {text}")
    return v


def _open_unit(text: str) -> float:
    v = float(text)
    if not (0.0 < v < 1.0):
        raise argparse.ArgumentTypeError(f"value must lie in (0, 1), got {text}")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdpcomp", description="Learning from SD-Pcomp pairs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic pairs.csv and test.csv")
    g.add_argument("--pi-plus", type=_open_unit, required=True)
    g.add_argument("--n-pairs", type=_pos_int, required=True)
    g.add_argument("--n-test", type=_pos_int, default=2000)
    g.add_argument("--dim", type=_pos_int, default=1)
    g.add_argument("--mean-gap", type=_nonneg, default=2.0)
    g.add_argument("--sigma", type=_positive, default=0.7)
    g.add_argument("--rho-s", type=_rate, default=0.0)
    g.add_argument("--rho-d", type=_rate, default=0.0)
    g.add_argument("--rho-c", type=_rate, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)

    t = sub.add_parser("train", help="fit a scorer on a pair file")
    t.add_argument("--pairs", required=True)
    t.add_argument("--estimator", choices=[e.value for e in Estimator], default="sdpc")
    t.add_argument("--correction", choices=[c.value for c in Correction], default="id")
    t.add_argument("--gamma", type=_unit)
    t.add_argument("--lambda", dest="lam", type=_unit)
    prior = t.add_mutually_exclusive_group(required=True)
    prior.add_argument("--pi-plus", type=_open_unit)
    prior.add_argument("--estimate-prior", choices=[s.value for s in PriorSide])
    t.add_argument("--arch", default="linear")
    t.add_argument("--epochs", type=_pos_int, default=100)
    t.add_argument("--batch", type=_pos_int, default=256)
    t.add_argument("--lr", type=_nonneg, default=1e-3)
    t.add_argument("--wd", type=_nonneg, default=1e-5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--test", help="optional labelled test file for metrics in the report")
    t.add_argument("--ordinary", help="labelled file used by the combined estimator")
    t.add_argument("--out-model", required=True)
    t.add_argument("--out-report", required=True)

    e = sub.add_parser("eval", help="accuracy and AUC of a saved model")
    e.add_argument("--model", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--append", help="CSV file to append one report row to")

    s = sub.add_parser("sweep", help="run a grid of synthetic trials")
    s.add_argument("--grid", required=True, help="JSON grid description")
    s.add_argument("--out", required=True, help="results CSV")
    return p


# ---------------------------------------------------------------------------
# commands


def _risk_spec(estimator: str, correction: str, gamma, lam) -> RiskSpec:
    est = Estimator(estimator)
    if est is Estimator.CONVEX and gamma is None:
        raise UsageError("--estimator convex needs --gamma")
    if est is Estimator.COMBINED and lam is None:
        raise UsageError("--estimator combined needs --lambda")
    if est is not Estimator.CONVEX and gamma is not None:
        raise UsageError("--gamma only applies to --estimator convex")
    if est is not Estimator.COMBINED and lam is not None:
        raise UsageError("--lambda only applies to --estimator combined")
    return RiskSpec(est, Correction(correction), gamma=gamma, lam=lam)


def cmd_generate(args, out) -> int:
    mix = GaussianMixtureSpec.symmetric(args.pi_plus, args.dim, args.mean_gap, args.sigma)
    rates = NoiseRates(args.rho_s, args.rho_d, args.rho_c)
    pairs, _ = generate_sdpc_pairs(mix, args.n_pairs, args.seed, rates)
    test = sample_labeled(mix, args.n_test, args.seed, stream=11)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pairs_csv(out_dir / "pairs.csv", pairs)
    write_test_csv(out_dir / "test.csv", test)
    n_s, n_d, _ = validate_pair_dataset(pairs)
    print(f"n_S={n_s}", file=out)
    print(f"n_D={n_d}", file=out)
    print(f"similar_fraction={n_s / (n_s + n_d):.6f}", file=out)
    return 0


def cmd_train(args, out) -> int:
    spec = _risk_spec(args.estimator, args.correction, args.gamma, args.lam)
    source = KnownPrior(args.pi_plus) if args.pi_plus is not None else EstimatedPrior(PriorSide(args.estimate_prior))
    cfg = TrainConfig(spec, source, args.epochs, args.batch, args.lr, args.wd, args.seed)
    t0 = time.perf_counter()
    pairs = read_pairs_csv(args.pairs)
    test = read_test_csv(args.test) if args.test else None
    ordinary = read_test_csv(args.ordinary) if args.ordinary else None
    scorer0 = parse_arch(args.arch, pairs.dim, seed=args.seed)
    result = train(pairs, cfg, scorer0, test=test, ordinary=ordinary)
    acc = acc10 = auc_v = None
    if test is not None:
        acc = accuracy(result.scorer, test)
        acc10 = float(np.mean(result.accuracy_trace[-10:]))
        try:
            auc_v = auc(result.scorer, test)
        except SingleClassTest:
            auc_v = None
    report = TrialReport(
        seed=args.seed,
        estimator=spec.estimator.value,
        correction=spec.correction.value,
        gamma=spec.gamma,
        lam=spec.lam,
        pi_plus=args.pi_plus,
        pi_hat=result.pi_hat,
        rho_s=None,
        rho_d=None,
        rho_c=None,
        n_pairs=len(pairs),
        final_accuracy=acc,
        accuracy_last10=acc10,
        final_auc=auc_v,
        final_risk=result.risk_trace[-1][1],
        risk_trace=result.risk_trace,
        wall_seconds=time.perf_counter() - t0,
    )
    result.scorer.save(args.out_model)
    Path(args.out_report).write_text(report.to_kv(), encoding="utf-8", newline="\n")
    print(f"final_risk={report.final_risk!r}", file=out)
    if result.pi_hat is not None:
        print(f"pi_hat={result.pi_hat:.6f}", file=out)
    if acc is not None:
        print(f"accuracy={acc:.4f}", file=out)
    return 0


def cmd_eval(args, out) -> int:
    scorer = Scorer.load(args.model)
    test = read_test_csv(args.test)
    acc = accuracy(scorer, test)
    try:
        auc_v: Optional[float] = auc(scorer, test)
    except SingleClassTest:
        auc_v = None
    print(f"accuracy={acc:.4f}", file=out)
    print("auc=n/a" if auc_v is None else f"auc={auc_v:.4f}", file=out)
    if args.append:
        row = {c: "" for c in REPORT_COLUMNS}
        row["accuracy"] = repr(acc)
        row["auc"] = "" if auc_v is None else repr(auc_v)
        path = Path(args.append)
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", encoding="utf-8", newline="") as fh:
            if new:
                fh.write(_csv_line(REPORT_COLUMNS))
            fh.write(_csv_line([row[c] for c in REPORT_COLUMNS]))
    return 0


GRID_DEFAULTS = {
    "estimators": ["sdpc"],
    "corrections": ["id"],
    "pi_plus": [0.7],
    "noise": [[0.0, 0.0, 0.0]],
    "seeds": [0],
    "prior": "known",
    "n_pairs": 2000,
    "n_test": 2000,
    "dim": 1,
    "mean_gap": 2.0,
    "sigma": 0.7,
    "arch": "linear",
    "epochs": 100,
    "batch": 256,
    "lr": 1e-3,
    "wd": 1e-5,
}


def load_grid(path) -> dict:
    """JSON object; list-valued keys span the grid, scalars are shared settings.

    Estimators are written as ``"sd"``, ``"convex:0.5"`` or ``"combined:0.8"``.
    """
    grid = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(grid, dict):
        raise ValueError("grid file must hold a JSON object")
    unknown = set(grid) - set(GRID_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown grid keys: {', '.join(sorted(unknown))}")
    return {**GRID_DEFAULTS, **grid}


def grid_cells(grid: dict):
    """Cells in a fixed order: prior, noise, estimator, correction, seed."""
    return itertools.product(
        grid["pi_plus"], grid["noise"], grid["estimators"], grid["corrections"], grid["seeds"]
    )


def _parse_estimator(text: str):
    name, _, weight = text.partition(":")
    est = Estimator(name)
    w = float(weight) if weight else None
    if est is Estimator.CONVEX:
        return est, (0.5 if w is None else w), None
    if est is Estimator.COMBINED:
        return est, None, (0.5 if w is None else w)
    return est, None, None


def run_cell(grid: dict, pi_plus, noise, estimator, correction, seed) -> list:
    t0 = time.perf_counter()
    row = {c: "" for c in SWEEP_COLUMNS}
    row.update(seed=str(seed), correction=str(correction), pi_plus=repr(float(pi_plus)))
    row["n_pairs"] = str(grid["n_pairs"])
    try:
        est, gamma, lam = _parse_estimator(str(estimator))
        row["estimator"] = est.value
        row["gamma"] = "" if gamma is None else repr(gamma)
        row["lambda"] = "" if lam is None else repr(lam)
        rates = NoiseRates(*(float(v) for v in noise))
        row.update(rho_s=repr(rates.rho_s), rho_d=repr(rates.rho_d), rho_c=repr(rates.rho_c))
        spec = RiskSpec(est, Correction(correction), gamma=gamma, lam=lam)
        source = KnownPrior(pi_plus) if grid["prior"] == "known" else EstimatedPrior(PriorSide(grid["prior"]))
        cfg = TrainConfig(spec, source, grid["epochs"], grid["batch"], grid["lr"], grid["wd"], seed)
        mix = GaussianMixtureSpec.symmetric(pi_plus, grid["dim"], grid["mean_gap"], grid["sigma"])
        n_ord = grid["n_pairs"] if est is Estimator.COMBINED else 0
        rep = run_trial(
            TrialSpec(cfg, mixture=mix, rates=rates, n_pairs=grid["n_pairs"], n_test=grid["n_test"],
                      arch=grid["arch"], n_ordinary=n_ord)
        )
        row.update(dict(zip(REPORT_COLUMNS, rep.csv_values())))
        if grid["prior"] == "known":
            row["pi_plus"] = repr(float(pi_plus))
    except (SDPcompError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_seconds"] = f"{time.perf_counter() - t0:.3f}"
    return [row[c] for c in SWEEP_COLUMNS]


def cmd_sweep(args, out) -> int:
    grid = load_grid(args.grid)
    lines = [_csv_line(SWEEP_COLUMNS)]
    n_err = 0
    for cell in grid_cells(grid):
        values = run_cell(grid, *cell)
        n_err += bool(values[-1])
        lines.append(_csv_line(values))
    Path(args.out).write_text("".join(lines), encoding="utf-8", newline="\n")
    print(f"cells={len(lines) - 1} errors={n_err}", file=out)
    return 0


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=err)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"sdpcomp {args.command}: {exc}", file=err)
        return 1
    except (SDPcompError, ValueError, OSError) as exc:
        print(f"sdpcomp {args.command}: error: {exc}", file=err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
