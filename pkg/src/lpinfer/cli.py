"""Command-line interface: ``lproj {mc,estimate,indifference,simulate,compare}``.

Exit codes: 0 success, 1 comparison failed, 2 input or configuration error,
3 too many failed repetitions, 4 estimation error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import montecarlo as mc
from .ar import ArSpec, ar_estimate
from .asymptotics import indifference_lp_vs_arla, indifference_lp_vs_lpna
from .bootstrap import BootstrapSpec, arla_efron_path, lp_pairs_bootstrap, lp_percentile_t_path
from .exceptions import ConfigInvalid, KeyMismatch, LpInferError, TooManyFailedDraws
from .lp import LpSpec, lp_estimate
from .numeric import RngStream
from .var import coefficients_from_dict, simulate, warn_if_explosive

EXIT_OK, EXIT_COMPARE_FAILED, EXIT_INPUT, EXIT_FAILURES, EXIT_ESTIMATION = 0, 1, 2, 3, 4
MIN_T = 30
MISSING_TOKENS = {"", "na", "nan", "null", "none", "."}
ESTIMATE_METHODS = ("LP-LA_b", "LP-LA", "LP_b", "LP", "AR-LA_b", "AR", "LP-LA_pairs")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def bundled(name: str) -> Path:
    """Path of a data file shipped with the package."""
    return Path(str(resources.files("lpinfer") / "data" / name))


# ---------------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class IngestedSeries:
    columns: tuple
    data: np.ndarray
    source: str
    missing_policy: str = "reject"

    def column_index(self, key) -> int:
        if key in self.columns:
            return self.columns.index(key)
        try:
            idx = int(key)
        except (TypeError, ValueError):
            raise ConfigInvalid(f"no column named {key!r} in {self.source}") from None
        if not 0 <= idx < len(self.columns):
            raise ConfigInvalid(f"column index {idx} out of range")
        return idx


def read_series(path, missing: str = "reject") -> IngestedSeries:
    """Read a header-plus-rows numeric CSV; any missing or non-numeric cell is an error.

    ``path`` may be ``"-"`` for standard input.
    """
    if missing != "reject":
        raise ConfigInvalid(f"unsupported missing-value policy {missing!r}")
    try:
        text = sys.stdin.read() if str(path) == "-" else Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc.strerror}") from None
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise ConfigInvalid(f"{path}: empty file")
    header = tuple(c.strip() for c in rows[0])
    values = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConfigInvalid(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in MISSING_TOKENS:
                raise ConfigInvalid(f"{path}: missing value at row {r}, column {header[c]!r}")
            try:
                v = float(cell)
            except ValueError:
                raise ConfigInvalid(f"{path}: non-numeric value {cell!r} at row {r}, column {header[c]!r}") from None
            if not math.isfinite(v):
                raise ConfigInvalid(f"{path}: non-finite value at row {r}, column {header[c]!r}")
            values[r - 2, c] = v
    if values.shape[0] < MIN_T:
        raise ConfigInvalid(f"{path}: {values.shape[0]} observations, need at least {MIN_T}")
    return IngestedSeries(header, values, str(path))


def write_series(path, data: np.ndarray, columns) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in np.asarray(data):
        w.writerow([_fmt(x) for x in row])
    _emit(path, buf.getvalue())


def _emit(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _parse_horizons(spec: str) -> list:
    out = []
    try:
        for part in spec.split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise ConfigInvalid(f"cannot parse horizons {spec!r}") from None
    if not out or min(out) < 1:
        raise ConfigInvalid("horizons must be positive integers")
    return sorted(set(out))


# ---------------------------------------------------------------------------
# Commands


def cmd_mc(args) -> int:
    if args.config == "var4_supplement":
        args.config = str(bundled("var4_supplement.json"))
    configs, outputs = mc.load_experiment_file(args.config)
    overrides = {}
    if args.full_scale:
        overrides.update(reps=5000, bootstrap_draws=2000)
        print("warning: full-scale settings (5000 reps, 2000 draws) take many CPU hours", file=sys.stderr)
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.draws is not None:
        overrides["bootstrap_draws"] = args.draws
    if args.seed is not None:
        overrides["root_seed"] = args.seed
    if overrides:
        configs = [dataclasses.replace(c, **overrides) for c in configs]
    status = EXIT_OK
    table = mc.McResultTable([])
    for cfg in configs:
        try:
            part = mc.run_experiment(cfg, args.threads)
        except TooManyFailedDraws as exc:
            print(f"error: {exc}", file=sys.stderr)
            part, status = exc.table, EXIT_FAILURES
        table = table + part
    out = args.out
    csv_path = f"{out}.csv" if out else outputs.get("csv")
    json_path = f"{out}.json" if out else outputs.get("json")
    if csv_path:
        table.to_csv(csv_path)
    else:
        sys.stdout.write(table.to_csv())
    if json_path:
        table.to_json(json_path)
    return status


def cmd_estimate(args) -> int:
    if args.lags < 1:
        raise ConfigInvalid("--lags must be >= 1 (lag augmentation needs p >= 1)")
    series = read_series(args.data)
    n = series.data.shape[1]
    i = series.column_index(args.response)
    if args.shock_weight is None:
        nu = np.zeros(n)
        nu[0] = 1.0
    else:
        parts = [s for s in args.shock_weight.split(",") if s.strip()]
        if len(parts) == 1 and not _is_number(parts[0]):
            nu = np.zeros(n)
            nu[series.column_index(parts[0])] = 1.0
        else:
            try:
                nu = np.array([float(s) for s in parts])
            except ValueError:
                raise ConfigInvalid(f"cannot parse --shock-weight {args.shock_weight!r}") from None
            if nu.size != n:
                raise ConfigInvalid(f"--shock-weight needs {n} entries")
    hs = _parse_horizons(args.horizons)
    if not 0 < args.level < 1:
        raise ConfigInvalid("--level must lie in (0, 1)")
    try:
        reports = _estimate(series.data, args.method, i, nu, args.lags, hs, args.level, args.boot_draws, args.seed)
    except ValueError as exc:
        if isinstance(exc, LpInferError):
            raise
        raise ConfigInvalid(str(exc)) from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["horizon", "point", "se", "lo", "hi", "method"])
    for h, r in zip(hs, reports):
        w.writerow([h, _fmt(r.point), _fmt(r.se), _fmt(r.lo), _fmt(r.hi), r.method])
    _emit(args.out, buf.getvalue())
    return EXIT_OK


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _estimate(data, method, i, nu, p, hs, level, draws, seed):
    rng = RngStream(seed, 0)
    if method in ("LP-LA_b", "LP_b"):
        spec = LpSpec(hs[0], i, nu, method == "LP-LA_b", p)
        return lp_percentile_t_path(data, spec, hs, BootstrapSpec(draws), level, rng)
    if method == "AR-LA_b":
        spec = ArSpec(hs[0], i, nu, p, lag_augmented=True)
        return arla_efron_path(data, spec, hs, BootstrapSpec(draws, interval="efron"), level, rng)
    if method in ("LP-LA", "LP"):
        return [lp_estimate(data, LpSpec(h, i, nu, method == "LP-LA", p), level)[0] for h in hs]
    if method == "AR":
        return [ar_estimate(data, ArSpec(h, i, nu, p, bias_correct=True), level) for h in hs]
    gen = rng.generator()
    boot = BootstrapSpec(draws, kind="pairs")
    return [lp_pairs_bootstrap(data, LpSpec(h, i, nu, True, p), boot, level, gen) for h in hs]


def cmd_indifference(args) -> int:
    if args.h_max < 2:
        raise ConfigInvalid("--h-max must be >= 2")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h", "rho_lower", "rho_upper"])
    for h in range(2, args.h_max + 1):
        w.writerow([h, _fmt(indifference_lp_vs_arla(h)), _fmt(indifference_lp_vs_lpna(h))])
    _emit(args.out, buf.getvalue())
    return EXIT_OK


def _load_dgp(path):
    try:
        d = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: malformed JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigInvalid(f"{path}: expected a JSON object")
    if "lag_blocks" in d:
        return coefficients_from_dict(d)
    if "kind" in d:
        cfg = {"dgp": d, "horizons": [1], "methods": ["ORACLE"]}
        dgp = mc.config_from_dict(cfg, Path(path).parent).dgp.resolve()
        return dgp.coeffs, dgp.innovations
    raise ConfigInvalid(f"{path}: expected 'lag_blocks' or 'kind'")


def cmd_simulate(args) -> int:
    coeffs, innov = _load_dgp(args.dgp)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        explosive = warn_if_explosive(coeffs)
    if explosive:
        print(f"warning: {caught[0].message}", file=sys.stderr)
    sample = simulate(coeffs, innov, args.T, rng=RngStream(args.seed, 0))
    write_series(args.out, sample.data, [f"y{k + 1}" for k in range(coeffs.n)])
    return EXIT_OK


def cmd_compare(args) -> int:
    observed = mc.McResultTable.from_csv(args.observed)
    reference = mc.McResultTable.from_csv(args.reference)
    report = mc.compare_tables(observed, reference, args.coverage_tol, args.length_tol)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dgp", "method", "horizon", "coverage", "ref_coverage", "median_length", "ref_length", "status"])
    for r in report.rows:
        w.writerow([*r.key, _fmt(r.coverage), _fmt(r.reference_coverage), _fmt(r.median_length),
                    _fmt(r.reference_length), "pass" if r.passed else "FAIL"])
    _emit(args.out, buf.getvalue())
    return EXIT_OK if report.passed else EXIT_COMPARE_FAILED


# ---------------------------------------------------------------------------


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("LPROJ_THREADS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lproj", description="Impulse-response inference with local projections.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment file")
    p.add_argument("config", help="experiment JSON, or 'var4_supplement' for the bundled one")
    p.add_argument("--reps", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
    p.add_argument("--full-scale", action="store_true", help="5000 repetitions and 2000 bootstrap draws")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("estimate", help="estimate impulse responses on a CSV data set")
    p.add_argument("data")
    p.add_argument("--response", default="0", help="response column (name or 0-based index)")
    p.add_argument("--shock-weight", help="comma-separated weights, or a column name for a unit shock")
    p.add_argument("--lags", type=int, default=4)
    p.add_argument("--horizons", default="1-12", help="e.g. '1-12' or '1,4,8'")
    p.add_argument("--method", choices=ESTIMATE_METHODS, default="LP-LA_b")
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--boot-draws", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("indifference", help="write the efficiency indifference curves as CSV")
    p.add_argument("--h-max", type=int, default=60)
    p.add_argument("--out")
    p.set_defaults(func=cmd_indifference)

    p = sub.add_parser("simulate", help="simulate a sample from a DGP file")
    p.add_argument("dgp", help="coefficient JSON or a DGP object such as {\"kind\": \"ar1\", \"rho\": 0.5}")
    p.add_argument("--T", type=int, default=240)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare a result table with a reference table")
    p.add_argument("observed")
    p.add_argument("reference", help="reference CSV, or 'paper_var4' for the bundled table")
    p.add_argument("--coverage-tol", type=float, default=0.03)
    p.add_argument("--length-tol", type=float, default=0.10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if getattr(args, "reference", None) == "paper_var4":
        args.reference = str(bundled("var4_reference.csv"))
    try:
        return args.func(args)
    except (ConfigInvalid, KeyMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TooManyFailedDraws as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    except (LpInferError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
