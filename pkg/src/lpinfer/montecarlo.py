"""Coverage and median-length experiments.

Every repetition ``r`` simulates one sample from its own random stream
``(root_seed, r, 0)`` and evaluates all methods and horizons on that sample.
Method ``m`` draws its bootstrap randomness from ``(root_seed, r, 1 + m)``.
Repetitions are therefore independent work units, and the aggregated table
does not depend on how they are spread over worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ar import ArSpec, ar_estimate
from .bootstrap import BootstrapSpec, arla_efron_path, lp_pairs_bootstrap, lp_percentile_t_path
from .exceptions import ConfigInvalid, KeyMismatch, LpInferError, TooManyFailedDraws
from .lp import LpSpec, lp_estimate
from .numeric import derive_stream
from .var import (
    VAR4_COVARIANCE,
    InnovationSpec,
    VarCoefficients,
    bivariate_var4_dgp,
    impulse_responses,
    load_coefficients,
    simulate,
)

METHODS = ("LP-LA_b", "LP-LA", "LP_b", "LP", "AR-LA_b", "AR", "LP-LA_pairs", "ORACLE", "EMPTY")
MAX_FAILED_SHARE = 0.10
CSV_COLUMNS = ("dgp", "method", "horizon", "coverage", "median_length", "failed", "reps")


@dataclass(frozen=True)
class DgpSpec:
    """Data generating process for an experiment.

    ``kind`` is ``"ar1"`` (needs ``rho``), ``"var4"`` (the bivariate VAR(4)
    with persistence ``rho``), ``"file"`` (coefficient JSON at ``path``) or
    ``"coefficients"`` (an explicit :class:`VarCoefficients`). ``lags`` is the
    estimation lag length and defaults to the true order.
    """

    kind: str
    rho: float | None = None
    path: str | None = None
    coefficients: VarCoefficients | None = None
    innovations: InnovationSpec | None = None
    response_variable: int | None = None
    response_weights: tuple | None = None
    lags: int | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ("ar1", "var4", "file", "coefficients"):
            raise ConfigInvalid(f"dgp.kind: unknown value {self.kind!r}")
        if self.kind in ("ar1", "var4") and self.rho is None:
            raise ConfigInvalid(f"dgp.rho is required for kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigInvalid("dgp.path is required for kind 'file'")
        if self.kind == "coefficients" and self.coefficients is None:
            raise ConfigInvalid("dgp.coefficients is required for kind 'coefficients'")
        if self.response_weights is not None:
            object.__setattr__(self, "response_weights", tuple(float(x) for x in self.response_weights))

    def resolve(self) -> "ResolvedDgp":
        innov = self.innovations
        if self.kind == "ar1":
            coeffs = VarCoefficients([float(self.rho)])
            innov = innov or InnovationSpec.gaussian([[1.0]])
            i, nu, label = 0, (1.0,), f"ar1(rho={self.rho:g})"
        elif self.kind == "var4":
            coeffs = bivariate_var4_dgp(float(self.rho))
            innov = innov or InnovationSpec.gaussian(VAR4_COVARIANCE)
            i, nu, label = 1, (1.0, 0.0), f"var4(rho={self.rho:g})"
        else:
            if self.kind == "file":
                coeffs, file_innov = load_coefficients(self.path)
                innov = innov or file_innov
                label = Path(self.path).stem
            else:
                coeffs, label = self.coefficients, "var"
            innov = innov or InnovationSpec()
            i = 0
            nu = tuple(np.eye(coeffs.n)[0])
        if self.response_variable is not None:
            i = int(self.response_variable)
        if self.response_weights is not None:
            nu = self.response_weights
        if not 0 <= i < coeffs.n:
            raise ConfigInvalid(f"dgp.response_variable {i} out of range for n={coeffs.n}")
        if len(nu) != coeffs.n:
            raise ConfigInvalid(f"dgp.response_weights must have length {coeffs.n}")
        lags = coeffs.p if self.lags is None else int(self.lags)
        return ResolvedDgp(coeffs, innov, i, np.asarray(nu, dtype=float), lags, self.label or label)


@dataclass(frozen=True)
class ResolvedDgp:
    coeffs: VarCoefficients
    innovations: InnovationSpec
    response_variable: int
    nu: np.ndarray
    lags: int
    label: str

    def truth(self, horizons) -> dict:
        irf = impulse_responses(self.coeffs, max(horizons))
        return {h: irf.response(self.response_variable, self.nu, h) for h in horizons}


@dataclass(frozen=True)
class MethodSpec:
    """An inference method; ``lags`` overrides the DGP's estimation lag length."""

    name: str
    lags: int | None = None

    def __post_init__(self):
        if self.name not in METHODS:
            raise ConfigInvalid(f"methods: unknown method {self.name!r}; choose from {METHODS}")
        if self.lags is not None and self.lags < 1:
            raise ConfigInvalid("methods: lags must be >= 1")

    @property
    def label(self) -> str:
        return self.name if self.lags is None else f"{self.name}^{self.lags}"


@dataclass(frozen=True)
class McExperimentConfig:
    dgp: DgpSpec
    methods: tuple
    horizons: tuple
    T: int = 240
    reps: int = 1000
    bootstrap_draws: int = 500
    level: float = 0.90
    root_seed: int = 0

    def __post_init__(self):
        methods = tuple(m if isinstance(m, MethodSpec) else MethodSpec(m) for m in self.methods)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if not methods:
            raise ConfigInvalid("methods: at least one method is required")
        if len({m.label for m in methods}) != len(methods):
            raise ConfigInvalid("methods: duplicate method labels")
        if self.reps < 1:
            raise ConfigInvalid("reps must be >= 1")
        if not self.horizons or min(self.horizons) < 1:
            raise ConfigInvalid("horizons must be a non-empty list of positive integers")
        if not 0 < self.level < 1:
            raise ConfigInvalid("level must lie in (0, 1)")
        if self.bootstrap_draws < 50:
            raise ConfigInvalid("bootstrap_draws must be >= 50")

    def validate(self) -> ResolvedDgp:
        dgp = self.dgp.resolve()
        max_lags = max((m.lags or dgp.lags) + 1 for m in self.methods)
        if max(self.horizons) >= self.T - max_lags - 5:
            raise ConfigInvalid(f"horizons must all be < T - lags - 5 = {self.T - max_lags - 5}")
        return dgp


# ---------------------------------------------------------------------------
# One repetition


@dataclass(frozen=True)
class RepOutcome:
    """Per (method label, horizon): ``(covered, length)`` or ``None`` on failure."""

    rep: int
    checksum: str
    results: dict
    sample_failed: bool = False


def simulate_repetition(config: McExperimentConfig, rep: int, dgp: ResolvedDgp | None = None):
    dgp = dgp or config.dgp.resolve()
    stream = derive_stream(config.root_seed, rep, 0)
    return simulate(dgp.coeffs, dgp.innovations, config.T, rng=stream)


def _intervals(method: MethodSpec, data, dgp: ResolvedDgp, config: McExperimentConfig, rng):
    """Return ``{h: (lo, hi) or None}`` for one method on one sample."""
    p = method.lags or dgp.lags
    i, nu, level, hs = dgp.response_variable, dgp.nu, config.level, config.horizons
    name = method.name
    if name in ("LP-LA_b", "LP_b"):
        spec = LpSpec(hs[0], i, nu, name == "LP-LA_b", p)
        reps = lp_percentile_t_path(data, spec, hs, BootstrapSpec(config.bootstrap_draws), level, rng, strict=False)
        return {h: None if r is None else r.interval for h, r in zip(hs, reps)}
    if name == "AR-LA_b":
        spec = ArSpec(hs[0], i, nu, p, lag_augmented=True)
        boot = BootstrapSpec(config.bootstrap_draws, interval="efron")
        reps = arla_efron_path(data, spec, hs, boot, level, rng, strict=False)
        return {h: None if r is None else r.interval for h, r in zip(hs, reps)}
    out = {}
    for h in hs:
        try:
            if name in ("LP-LA", "LP"):
                rep = lp_estimate(data, LpSpec(h, i, nu, name == "LP-LA", p), level)[0]
            elif name == "AR":
                rep = ar_estimate(data, ArSpec(h, i, nu, p, bias_correct=True), level)
            elif name == "LP-LA_pairs":
                boot = BootstrapSpec(config.bootstrap_draws, kind="pairs")
                rep = lp_pairs_bootstrap(data, LpSpec(h, i, nu, True, p), boot, level, rng)
            elif name == "ORACLE":
                out[h] = (-math.inf, math.inf)
                continue
            else:  # EMPTY
                out[h] = (math.nan, math.nan)
                continue
            out[h] = rep.interval
        except (LpInferError, np.linalg.LinAlgError):
            out[h] = None
    return out


def evaluate_repetition(config: McExperimentConfig, rep: int, dgp: ResolvedDgp | None = None) -> RepOutcome:
    dgp = dgp or config.dgp.resolve()
    truth = dgp.truth(config.horizons)
    keys = [(m.label, h) for m in config.methods for h in config.horizons]
    try:
        sample = simulate_repetition(config, rep, dgp)
    except LpInferError:
        return RepOutcome(rep, "", {k: None for k in keys}, sample_failed=True)
    data = sample.data
    checksum = hashlib.sha256(np.ascontiguousarray(data).tobytes()).hexdigest()
    results = {}
    for m_idx, method in enumerate(config.methods):
        rng = derive_stream(config.root_seed, rep, 1 + m_idx)
        try:
            ivs = _intervals(method, data, dgp, config, rng)
        except (LpInferError, np.linalg.LinAlgError):
            ivs = {h: None for h in config.horizons}
        for h in config.horizons:
            iv = ivs[h]
            if iv is None or (math.isnan(iv[0]) and method.name != "EMPTY"):
                results[(method.label, h)] = None
            else:
                lo, hi = iv
                results[(method.label, h)] = (bool(lo <= truth[h] <= hi), float(hi - lo))
    return RepOutcome(rep, checksum, results)


def _run_chunk(args):
    config, reps = args
    dgp = config.dgp.resolve()
    return [evaluate_repetition(config, r, dgp) for r in reps]


# ---------------------------------------------------------------------------
# Result tables


@dataclass(frozen=True)
class McRow:
    dgp: str
    method: str
    horizon: int
    coverage: float
    median_length: float
    failed: int
    reps: int

    @property
    def key(self) -> tuple:
        return (self.dgp, self.method, self.horizon)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class McResultTable:
    rows: list
    wall_time: float = field(default=0.0, compare=False)

    def row(self, dgp: str, method: str, horizon: int) -> McRow:
        for r in self.rows:
            if r.key == (dgp, method, horizon):
                return r
        raise KeyMismatch(f"no row for {(dgp, method, horizon)}")

    def keys(self) -> list:
        return [r.key for r in self.rows]

    def __add__(self, other: "McResultTable") -> "McResultTable":
        return McResultTable(self.rows + other.rows, self.wall_time + other.wall_time)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.dgp, r.method, r.horizon, _fmt(r.coverage), _fmt(r.median_length), r.failed, r.reps])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "McResultTable":
        text = str(path_or_text)
        if "\n" not in text:
            text = Path(text).read_text()
        reader = csv.DictReader(io.StringIO(text))
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigInvalid(f"result table is missing columns {sorted(missing)}")
        rows = []
        for line, d in enumerate(reader, start=2):
            try:
                rows.append(
                    McRow(
                        d["dgp"],
                        d["method"],
                        int(d["horizon"]),
                        float(d["coverage"]),
                        float(d["median_length"]),
                        int(d["failed"]),
                        int(d["reps"]),
                    )
                )
            except ValueError as exc:
                raise ConfigInvalid(f"result table line {line}: {exc}") from None
        return cls(rows)

    def to_json(self, path=None) -> str:
        payload = {
            "columns": list(CSV_COLUMNS),
            "rows": [[r.dgp, r.method, r.horizon, r.coverage, r.median_length, r.failed, r.reps] for r in self.rows],
            "wall_time": self.wall_time,
        }
        text = json.dumps(payload, indent=1, allow_nan=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path_or_text) -> "McResultTable":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        payload = json.loads(text)
        rows = [McRow(d, m, int(h), float(c), float(ml), int(f), int(n)) for d, m, h, c, ml, f, n in payload["rows"]]
        return cls(rows, float(payload.get("wall_time", 0.0)))


def aggregate(config: McExperimentConfig, outcomes, label: str) -> McResultTable:
    """Reduce per-repetition outcomes, ordered by repetition index, to table rows."""
    outcomes = sorted(outcomes, key=lambda o: o.rep)
    rows = []
    for m in config.methods:
        for h in config.horizons:
            vals = [o.results[(m.label, h)] for o in outcomes]
            ok = [v for v in vals if v is not None]
            failed = len(vals) - len(ok)
            if ok:
                coverage = sum(c for c, _ in ok) / len(ok)
                lengths = np.array([ln for _, ln in ok])
                median = float(np.median(lengths))
            else:
                coverage, median = math.nan, math.nan
            rows.append(McRow(label, m.label, h, float(coverage), median, failed, len(vals)))
    return McResultTable(rows)


def run_experiment(config: McExperimentConfig, parallelism: int = 1, strict: bool = True) -> McResultTable:
    """Run all repetitions and aggregate coverage and median length.

    Parameters
    ----------
    config : McExperimentConfig
    parallelism : int
        Number of worker processes; 1 runs in-process.
    strict : bool
        Raise :class:`TooManyFailedDraws` (with the table attached as
        ``exc.table``) when more than 10% of the repetitions fail for any row.
    """
    dgp = config.validate()
    start = time.perf_counter()
    reps = list(range(config.reps))
    if parallelism <= 1 or config.reps == 1:
        outcomes = [evaluate_repetition(config, r, dgp) for r in reps]
    else:
        n_chunks = min(config.reps, 4 * parallelism)
        chunks = [reps[k::n_chunks] for k in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = [o for part in pool.map(_run_chunk, [(config, c) for c in chunks]) for o in part]
    table = aggregate(config, outcomes, dgp.label)
    table.wall_time = time.perf_counter() - start
    if strict:
        bad = [r for r in table.rows if r.failed > MAX_FAILED_SHARE * r.reps]
        if bad:
            exc = TooManyFailedDraws(
                "more than 10% of repetitions failed for " + ", ".join(f"{r.method} h={r.horizon}" for r in bad)
            )
            exc.table = table
            raise exc
    return table


# ---------------------------------------------------------------------------
# Comparison against reference tables


@dataclass(frozen=True)
class RowComparison:
    key: tuple
    coverage: float
    reference_coverage: float
    median_length: float
    reference_length: float
    coverage_ok: bool
    length_ok: bool

    @property
    def passed(self) -> bool:
        return self.coverage_ok and self.length_ok


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


_EPS = 1e-12


def compare_tables(observed: McResultTable, reference: McResultTable, coverage_tol: float, length_rel_tol: float):
    """Check every observed row against the reference row with the same key.

    Tolerances are closed: a coverage gap of exactly ``coverage_tol`` passes.

    Raises
    ------
    KeyMismatch
        If an observed row has no counterpart in the reference.
    """
    ref = {r.key: r for r in reference.rows}
    out = []
    for r in observed.rows:
        if r.key not in ref:
            raise KeyMismatch(f"reference table has no row {r.key}")
        q = ref[r.key]
        cov_ok = abs(r.coverage - q.coverage) <= coverage_tol + _EPS
        len_ok = abs(r.median_length - q.median_length) <= length_rel_tol * abs(q.median_length) + _EPS
        out.append(RowComparison(r.key, r.coverage, q.coverage, r.median_length, q.median_length, cov_ok, len_ok))
    return ComparisonReport(tuple(out))


# ---------------------------------------------------------------------------
# Experiment files


SCHEMA_VERSION = 1


def _innovations_from_dict(d) -> InnovationSpec | None:
    if d is None:
        return None
    kind = d.get("kind")
    if kind == "iid-gaussian":
        cov = d.get("covariance")
        return InnovationSpec.gaussian(None if cov is None else np.asarray(cov, dtype=float))
    if kind == "arch1":
        loading = d.get("loading")
        return InnovationSpec.arch(float(d.get("alpha0", 0.3)), float(d.get("alpha1", 0.7)), loading)
    raise ConfigInvalid(f"innovations.kind: unknown value {kind!r}")


def config_from_dict(d: dict, base_dir=".") -> McExperimentConfig:
    """Build a config from one entry of an experiment file."""
    if not isinstance(d, dict):
        raise ConfigInvalid("each experiment must be a JSON object")
    try:
        g = d["dgp"]
    except KeyError:
        raise ConfigInvalid("missing field 'dgp'") from None
    if not isinstance(g, dict) or "kind" not in g:
        raise ConfigInvalid("field 'dgp' must be an object with a 'kind'")
    path = g.get("path")
    if path is not None and not Path(path).is_absolute():
        path = str(Path(base_dir) / path)
    if g["kind"] == "file" and path is not None and not Path(path).exists():
        raise ConfigInvalid(f"dgp.path: file not found: {path}")
    dgp = DgpSpec(
        g["kind"],
        rho=g.get("rho"),
        path=path,
        innovations=_innovations_from_dict(g.get("innovations")),
        response_variable=g.get("response_variable"),
        response_weights=g.get("response_weights"),
        lags=g.get("lags"),
        label=g.get("label"),
    )
    methods = []
    for m in d.get("methods", []):
        if isinstance(m, str):
            methods.append(MethodSpec(m))
        elif isinstance(m, dict) and "name" in m:
            methods.append(MethodSpec(m["name"], m.get("lags")))
        else:
            raise ConfigInvalid(f"methods: cannot parse entry {m!r}")
    for name in ("horizons",):
        if name not in d:
            raise ConfigInvalid(f"missing field {name!r}")
    try:
        return McExperimentConfig(
            dgp,
            tuple(methods),
            tuple(d["horizons"]),
            T=int(d.get("T", 240)),
            reps=int(d.get("reps", 1000)),
            bootstrap_draws=int(d.get("bootstrap_draws", 500)),
            level=float(d.get("level", 0.90)),
            root_seed=int(d.get("root_seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"invalid experiment field: {exc}") from None


def load_experiment_file(path) -> tuple[list, dict]:
    """Parse an experiment file into configs plus its ``output`` section."""
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigInvalid(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: malformed JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigInvalid("experiment file must hold a JSON object")
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigInvalid(f"field 'schema_version' must be {SCHEMA_VERSION}, got {d.get('schema_version')!r}")
    exps = d.get("experiments")
    if isinstance(exps, dict):
        exps = [exps]
    if not isinstance(exps, list) or not exps:
        raise ConfigInvalid("field 'experiments' must be a non-empty list")
    configs = [config_from_dict(e, path.parent) for e in exps]
    return configs, d.get("output") or {}
