"""Experiment runner.

Subcommands ``run``, ``lemmas``, ``lower-bound``, ``upper-bound``,
``shifting`` and ``oracle-check``. ``run`` takes the experiment name from the
config file (key ``experiment``) or ``--experiment``.

Config files are INI text. Section ``[common]`` applies to every experiment;
a section named after an experiment (``upper_bound``, ``lower_bound``,
``lemma_suite``, ``shifting_regret``, ``oracle_check``) applies on top of it,
and command-line flags apply last. Keys are the :class:`ExperimentConfig`
field names; ``horizons`` is a comma-separated list and ``gamma = auto`` means
gamma = beta.

    [common]
    seeds = 2000
    dimension = 1

    [upper_bound]
    horizons = 64, 256, 1024
    beta = 0.0
    d_beta = 1.0

Exit codes: 0 ok, 1 usage, 2 invariant violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .adversary import (
    batch_comparator_gain,
    random_shift_times,
    rademacher_batch,
    shift_comparator,
    worst_case_block_path,
)
from .analysis import run_lemma_suite, shift_to_path_budget, theorem1_bound, theorem2_bound
from .core import (
    BUDGET_TOL,
    DomainSpec,
    DynamicsBudget,
    InvalidParameter,
    InvariantViolation,
    NumericalFailure,
    linear_loss,
    random_convex_loss,
)
from .oracle import grid_oracle, grid_tolerance, solve_linear_path_batch, solve_offline
from .pog import run_pog, run_pog_linear_batch, schedule_corollary1, schedule_corollary2
from .prox import Regularizer, RegularizerKind

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 1, 2, 3
BOUND_TOL = 1e-5
MAX_CHUNK = 1000

RUN_COLUMNS = ("seed", "T", "beta", "d_beta", "measured_regret", "theory_upper",
               "theory_lower", "comparator_gain", "runtime_ms")
ORACLE_COLUMNS = ("seed", "T", "beta", "d_beta", "solver_objective", "grid_objective",
                  "tolerance", "residual", "agree", "runtime_ms")
LEMMA_COLUMNS = ("check", "inputs", "lhs", "rhs", "ok")
SUMMARY_COLUMNS = ("T", "n", "mean_regret", "se_regret", "mean_theory_upper",
                   "mean_theory_lower", "mean_comparator_gain")


class ExperimentKind(str, Enum):
    UPPER_BOUND = "upper_bound"
    LOWER_BOUND = "lower_bound"
    LEMMA_SUITE = "lemma_suite"
    SHIFTING_REGRET = "shifting_regret"
    ORACLE_CHECK = "oracle_check"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentKind = ExperimentKind.UPPER_BOUND
    horizons: tuple[int, ...] = (64, 256, 1024)
    dimension: int = 1
    beta: float = 0.0
    d_beta: float = 1.0
    shifts: int = 0
    gamma: Optional[float] = None  # None: gamma = beta
    domain: str = "ball"  # ball (center 0, radius) or box ([lower, upper]^d)
    radius: float = 1.0
    lower: float = -1.0
    upper: float = 1.0
    regularizer: str = "zero"
    learner: str = "zero"  # lower_bound only: zero or pog
    seeds: int = 100
    seed_start: int = 0
    resolution: float = 0.01  # oracle_check grid spacing
    timing: bool = True
    out: str = "results.csv"

    def __post_init__(self):
        object.__setattr__(self, "experiment", ExperimentKind(self.experiment))
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        for name in ("beta", "gamma"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v < 1.0:
                raise InvalidParameter(f"{name}={v} outside the valid interval [0, 1)")
        if not self.horizons or min(self.horizons) < 1:
            raise InvalidParameter("horizons must be positive integers")
        if self.dimension < 1 or self.seeds < 1 or self.seed_start < 0:
            raise InvalidParameter("dimension and seeds must be positive, seed_start nonnegative")
        if not self.d_beta >= 0 or self.shifts < 0:
            raise InvalidParameter("d_beta and shifts must be nonnegative")
        if self.domain not in ("ball", "box"):
            raise InvalidParameter(f"unknown domain {self.domain!r} (ball or box)")
        if not self.radius > 0 or not self.upper > self.lower or not self.resolution > 0:
            raise InvalidParameter("domain radius, box bounds or resolution invalid")
        if self.learner not in ("zero", "pog"):
            raise InvalidParameter(f"unknown learner {self.learner!r} (zero or pog)")
        Regularizer.parse(self.regularizer)
        if self.experiment in (ExperimentKind.UPPER_BOUND, ExperimentKind.LOWER_BOUND) \
                and self.effective_gamma < self.beta:
            raise InvalidParameter(f"gamma={self.gamma} below beta={self.beta}")
        if self.experiment is ExperimentKind.SHIFTING_REGRET and self.shifts >= min(self.horizons):
            raise InvalidParameter("shifts must be below every horizon")

    @property
    def effective_gamma(self) -> float:
        return self.beta if self.gamma is None else self.gamma

    @property
    def budget(self) -> DynamicsBudget:
        return DynamicsBudget(self.beta, self.d_beta)

    def domain_spec(self) -> DomainSpec:
        """The configured domain with G = d (squared norm of a +-1 vector)."""
        d = self.dimension
        if self.domain == "ball":
            return DomainSpec.ball(np.zeros(d), self.radius, subgrad_sq_bound=float(d))
        return DomainSpec.box(np.full(d, self.lower), np.full(d, self.upper),
                              subgrad_sq_bound=float(d))

    # -- serialization ------------------------------------------------------

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "experiment":
                out[f.name] = v.value
            elif f.name == "horizons":
                out[f.name] = ",".join(str(h) for h in v)
            elif f.name == "gamma":
                out[f.name] = "auto" if v is None else repr(v)
            elif isinstance(v, bool):
                out[f.name] = "true" if v else "false"
            else:
                out[f.name] = repr(v) if isinstance(v, float) else str(v)
        return out

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser["common"] = self.to_mapping()
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in data.items():
            if key not in fields:
                raise InvalidParameter(f"unknown config key '{key}'")
            kwargs[key] = _convert(key, raw)
        return cls(**kwargs)

    @classmethod
    def from_ini(cls, text: str, experiment: Optional[str] = None) -> "ExperimentConfig":
        return cls.from_mapping(_merge_ini(text, experiment))

    def digest(self) -> str:
        """Hash of every setting that affects the CSV body."""
        data = self.to_mapping()
        data.pop("out")
        data.pop("timing")
        canon = "\n".join(f"{k}={data[k]}" for k in sorted(data))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _convert(key: str, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key == "horizons":
            return tuple(int(h) for h in text.replace(" ", "").split(",") if h)
        if key == "gamma":
            return None if text.lower() in ("auto", "") else float(text)
        if key in ("dimension", "shifts", "seeds", "seed_start"):
            return int(text)
        if key in ("beta", "d_beta", "radius", "lower", "upper", "resolution"):
            return float(text)
        if key == "timing":
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return text.lower() in ("true", "1", "yes")
    except ValueError:
        raise InvalidParameter(f"bad value for '{key}': {raw!r}") from None
    return text


def _merge_ini(text: str, experiment: Optional[str]) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidParameter(f"config parse error: {exc}") from None
    known = {"common"} | {k.value for k in ExperimentKind}
    for section in parser.sections():
        if section not in known:
            raise InvalidParameter(f"unknown config section '{section}'")
    data = dict(parser["common"]) if parser.has_section("common") else {}
    name = experiment or data.get("experiment")
    if name is not None and parser.has_section(str(name)):
        data.update(parser[str(name)])
    if experiment is not None:
        data["experiment"] = experiment
    return data


def parse_config(path: Optional[str] = None, experiment: Optional[str] = None,
                 overrides: Optional[dict] = None) -> ExperimentConfig:
    """File values, then ``overrides`` (flags) on top."""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InvalidParameter(f"cannot read config {path}: {exc.strerror}") from None
        data = _merge_ini(text, experiment)
    elif experiment is not None:
        data["experiment"] = experiment
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "experiment" not in data:
        raise InvalidParameter("no experiment given (config key 'experiment' or --experiment)")
    return ExperimentConfig.from_mapping(data)


# ---------------------------------------------------------------------------
# Experiments: each chunk function is pure in (config, T, seeds)
# ---------------------------------------------------------------------------


def _is_zero_reg(reg: Regularizer) -> bool:
    return reg.kind is not RegularizerKind.L1 or reg.weight == 0.0


def _interval(dom: DomainSpec) -> tuple[float, float]:
    if dom.kind.value == "ball":
        return float(dom.center[0] - dom.radius), float(dom.center[0] + dom.radius)
    return float(dom.lower[0]), float(dom.upper[0])


def _check_bound(seeds, regret, upper, T):
    bad = np.nonzero(regret > upper + BOUND_TOL)[0]
    if bad.size:
        i = int(bad[0])
        raise InvariantViolation(
            f"measured regret {regret[i]:.10g} exceeds the dynamic-regret bound "
            f"{upper[i]:.10g} (seed={seeds[i]}, T={T})")


def _chunk_upper_bound(cfg: ExperimentConfig, T: int, seeds: Sequence[int]) -> list[tuple]:
    dom, budget = cfg.domain_spec(), cfg.budget
    R, G, d = dom.R, dom.G, cfg.dimension
    sched = schedule_corollary1(cfg.effective_gamma, cfg.beta, cfg.d_beta, R, G, T)
    reg = Regularizer.parse(cfg.regularizer)
    signs = rademacher_batch(seeds, T, d)
    if _is_zero_reg(reg):
        learner, _ = run_pog_linear_batch(signs, sched.etas(T), dom)
        if d == 1:
            lo, hi = _interval(dom)
            comp = solve_linear_path_batch(signs[:, :, 0], lo, hi, cfg.beta, cfg.d_beta).objective
        else:
            comp = np.array([solve_offline([linear_loss(v) for v in s], dom, budget).objective
                             for s in signs])
        upper = np.full(len(seeds), theorem2_bound(sched, budget, R, G, 0.0, 0.0, T))
    else:
        learner, comp, upper = (np.empty(len(seeds)) for _ in range(3))
        for i, s in enumerate(signs):
            losses = [linear_loss(v, reg) for v in s]
            traj = run_pog(losses, sched, dom)
            learner[i] = traj.losses.sum()
            comp[i] = solve_offline(losses, dom, budget).objective
            upper[i] = theorem2_bound(sched, budget, R, G, reg.value(traj.decisions[0]),
                                      reg.value(traj.final), T)
    regret = learner - comp
    _check_bound(seeds, regret, upper, T)
    lower = theorem1_bound(budget, T)
    return [(s, T, regret[i], upper[i], lower, -comp[i]) for i, s in enumerate(seeds)]


def _chunk_lower_bound(cfg: ExperimentConfig, T: int, seeds: Sequence[int]) -> list[tuple]:
    budget, d = cfg.budget, cfg.dimension
    path = worst_case_block_path(T, budget)
    if path > budget.d_beta + BUDGET_TOL * max(1.0, budget.d_beta):
        raise InvariantViolation(f"block comparator path {path:.10g} exceeds {budget.d_beta} (T={T})")
    signs = rademacher_batch(seeds, T, d)
    gain = batch_comparator_gain(signs, budget)
    lower = theorem1_bound(budget, T)
    if cfg.learner == "zero":
        return [(s, T, gain[i], None, lower, gain[i]) for i, s in enumerate(seeds)]
    dom = DomainSpec.unit_ball(d)
    sched = schedule_corollary1(cfg.effective_gamma, cfg.beta, cfg.d_beta, dom.R, dom.G, T)
    learner, _ = run_pog_linear_batch(signs, sched.etas(T), dom)
    upper = theorem2_bound(sched, budget, dom.R, dom.G, 0.0, 0.0, T)
    regret = learner + gain
    return [(s, T, regret[i], upper, lower, gain[i]) for i, s in enumerate(seeds)]


def _chunk_shifting(cfg: ExperimentConfig, T: int, seeds: Sequence[int]) -> list[tuple]:
    dom, m = cfg.domain_spec(), cfg.shifts
    R, G = dom.R, dom.G
    sched = schedule_corollary2(cfg.effective_gamma, m, R, G, T)
    path_budget = DynamicsBudget(0.0, shift_to_path_budget(m, R))
    upper = theorem2_bound(sched, path_budget, R, G, 0.0, 0.0, T)
    signs = rademacher_batch(seeds, T, cfg.dimension)
    learner, _ = run_pog_linear_batch(signs, sched.etas(T), dom)
    comp = np.empty(len(seeds))
    for i, s in enumerate(seeds):
        rng = np.random.default_rng([int(s), T])
        seq = shift_comparator(signs[i], random_shift_times(rng, T, m), dom)
        if seq.shift_count > m:
            raise InvariantViolation(f"comparator shifts {seq.shift_count} > {m} (seed={s})")
        comp[i] = float(np.sum(signs[i] * seq.points))
    regret = learner - comp
    _check_bound(seeds, regret, np.full(len(seeds), upper), T)
    lower = theorem1_bound(path_budget, T)
    return [(s, T, regret[i], upper, lower, -comp[i]) for i, s in enumerate(seeds)]


def _chunk_oracle_check(cfg: ExperimentConfig, T: int, seeds: Sequence[int]) -> list[tuple]:
    dom, budget = cfg.domain_spec(), cfg.budget
    reg = Regularizer.parse(cfg.regularizer)
    rows = []
    for s in seeds:
        rng = np.random.default_rng([int(s), T])
        losses = [random_convex_loss(rng, dom, reg) for _ in range(T)]
        grid = grid_oracle(losses, dom, budget, cfg.resolution)
        sol = solve_offline(losses, dom, budget)
        tol = grid_tolerance(losses, dom, budget, cfg.resolution)
        agree = abs(sol.objective - grid.objective) <= tol and sol.residual <= 1e-7
        rows.append((s, T, sol.objective, grid.objective, tol, sol.residual, agree))
    return rows


CHUNK_RUNNERS = {
    ExperimentKind.UPPER_BOUND: _chunk_upper_bound,
    ExperimentKind.LOWER_BOUND: _chunk_lower_bound,
    ExperimentKind.SHIFTING_REGRET: _chunk_shifting,
    ExperimentKind.ORACLE_CHECK: _chunk_oracle_check,
}


def _timed_chunk(cfg: ExperimentConfig, T: int, seeds: Sequence[int]):
    start = time.perf_counter()
    rows = CHUNK_RUNNERS[cfg.experiment](cfg, T, list(seeds))
    elapsed_ms = (time.perf_counter() - start) * 1e3 / max(len(seeds), 1)
    return rows, elapsed_ms


def worker_count() -> int:
    raw = os.environ.get("DYNREG_THREADS")
    cpus = os.cpu_count() or 1
    if raw is None:
        return cpus
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameter(f"DYNREG_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InvalidParameter(f"DYNREG_THREADS must be a positive integer, got {raw!r}")
    return min(n, cpus)


def _chunks(cfg: ExperimentConfig, workers: int) -> list[tuple[int, list[int]]]:
    seeds = list(range(cfg.seed_start, cfg.seed_start + cfg.seeds))
    size = min(MAX_CHUNK, max(1, math.ceil(len(seeds) / workers)))
    return [(T, seeds[i:i + size]) for T in cfg.horizons for i in range(0, len(seeds), size)]


def collect_rows(cfg: ExperimentConfig, workers: Optional[int] = None) -> list[tuple]:
    """All per-seed rows, ordered by T then seed, with per-seed runtime in ms
    appended (0 when timing is off)."""
    workers = worker_count() if workers is None else workers
    jobs = _chunks(cfg, workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_timed_chunk, cfg, T, s) for T, s in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_timed_chunk(cfg, T, s) for T, s in jobs]
    rows = []
    for chunk_rows, ms in results:
        ms = ms if cfg.timing else 0.0
        rows.extend(r + (ms,) for r in chunk_rows)
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _header(cfg: ExperimentConfig) -> list[str]:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    last = cfg.seed_start + cfg.seeds - 1
    return [f"# dynreg experiment={cfg.experiment.value} config_sha256={cfg.digest()} "
            f"seeds={cfg.seed_start}..{last} generated={stamp}"]


def write_csv(path: Path, header: list[str], columns: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def loglog_slope(horizons: Sequence[int], means: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(mean) on log(T); None when undefined."""
    h, m = np.asarray(horizons, float), np.asarray(means, float)
    if len(h) < 2 or np.any(m <= 0) or len(set(h)) < 2:
        return None
    return float(np.polyfit(np.log(h), np.log(m), 1)[0])


def summarize(rows: Sequence[tuple], horizons: Sequence[int]) -> tuple[list[tuple], Optional[float]]:
    """Per-T mean and standard error of measured regret plus mean bounds."""
    out = []
    for T in horizons:
        sel = [r for r in rows if r[1] == T]
        reg = np.array([r[4] for r in sel], float)
        n = len(reg)
        se = float(reg.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        ups = [r[5] for r in sel if r[5] not in (None, "")]
        out.append((T, n, float(reg.mean()), se,
                    float(np.mean(ups)) if ups else None,
                    float(np.mean([r[6] for r in sel])),
                    float(np.mean([r[7] for r in sel]))))
    return out, loglog_slope([r[0] for r in out], [r[2] for r in out])


def summary_path(out: Path) -> Path:
    return out.with_name(out.stem + ".summary.csv")


def run(cfg: ExperimentConfig, workers: Optional[int] = None, stream=sys.stdout) -> int:
    """Run one experiment and write its CSV (and summary); returns an exit code."""
    out = Path(cfg.out)
    header = _header(cfg)
    if cfg.experiment is ExperimentKind.LEMMA_SUITE:
        results = run_lemma_suite()
        write_csv(out, header, LEMMA_COLUMNS,
                  [(r.name, r.inputs, r.lhs, r.rhs, r.ok) for r in results])
        failing = [r for r in results if not r.ok]
        for r in failing:
            print(f"FAILED {r.name}: lhs={r.lhs!r} rhs={r.rhs!r} ({r.inputs})", file=sys.stderr)
        print(f"lemma suite: {len(results) - len(failing)}/{len(results)} checks passed", file=stream)
        return EXIT_INVARIANT if failing else EXIT_OK

    if cfg.experiment is ExperimentKind.ORACLE_CHECK:
        raw = collect_rows(cfg, workers)
        rows = [(s, T, cfg.beta, cfg.d_beta, so, go, tol, res, ok, ms)
                for s, T, so, go, tol, res, ok, ms in raw]
        write_csv(out, header, ORACLE_COLUMNS, rows)
        bad = [r for r in rows if not r[8]]
        for r in bad[:10]:
            print(f"FAILED oracle agreement: seed={r[0]} T={r[1]} solver={r[4]!r} "
                  f"grid={r[5]!r} tol={r[6]!r} residual={r[7]!r}", file=sys.stderr)
        print(f"oracle check: {len(rows) - len(bad)}/{len(rows)} instances agree", file=stream)
        return EXIT_INVARIANT if bad else EXIT_OK

    raw = collect_rows(cfg, workers)
    d_col = cfg.d_beta
    if cfg.experiment is ExperimentKind.SHIFTING_REGRET:
        d_col = shift_to_path_budget(cfg.shifts, cfg.domain_spec().R)
        header.append(f"# shifts={cfg.shifts} d_beta column holds the implied path budget")
    rows = [(s, T, cfg.beta, d_col, reg, up, lo, gain, ms) for s, T, reg, up, lo, gain, ms in raw]
    write_csv(out, header, RUN_COLUMNS, rows)
    summary, slope = summarize(rows, cfg.horizons)
    slope_line = f"# loglog_slope={_fmt(slope)}"
    write_csv(summary_path(out), header + [slope_line], SUMMARY_COLUMNS, summary)
    for T, n, mean, se, up, lo, gain in summary:
        up_text = "" if up is None else f" upper={up:.6g}"
        print(f"T={T} n={n} mean_regret={mean:.6g} se={se:.3g}{up_text} lower={lo:.6g}", file=stream)
    print(f"log-log slope: {_fmt(slope) or 'n/a'}", file=stream)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


SUBCOMMANDS = {
    "run": None,
    "lemmas": ExperimentKind.LEMMA_SUITE,
    "lower-bound": ExperimentKind.LOWER_BOUND,
    "upper-bound": ExperimentKind.UPPER_BOUND,
    "oracle-check": ExperimentKind.ORACLE_CHECK,
    "shifting": ExperimentKind.SHIFTING_REGRET,
}

FLAG_TO_KEY = {
    "horizons": "horizons", "beta": "beta", "dbeta": "d_beta", "gamma": "gamma",
    "dim": "dimension", "seeds": "seeds", "out": "out", "shifts": "shifts",
    "learner": "learner", "domain": "domain", "radius": "radius",
    "regularizer": "regularizer", "resolution": "resolution", "seed_start": "seed_start",
    "timing": "timing", "experiment": "experiment",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    d = ExperimentConfig()
    p.add_argument("--config", metavar="PATH", help="INI config file")
    p.add_argument("--horizons", metavar="LIST",
                   help=f"comma-separated horizons T (default {','.join(map(str, d.horizons))})")
    p.add_argument("--beta", type=float, metavar="F", help=f"path weight exponent in [0, 1) (default {d.beta})")
    p.add_argument("--dbeta", type=float, metavar="F", help=f"path budget D (default {d.d_beta})")
    p.add_argument("--gamma", metavar="F", help="step-size exponent in [0, 1) (default: beta)")
    p.add_argument("--dim", type=int, metavar="N", help=f"dimension d (default {d.dimension})")
    p.add_argument("--seeds", type=int, metavar="N", help=f"seeds per horizon (default {d.seeds})")
    p.add_argument("--seed-start", dest="seed_start", type=int, metavar="N",
                   help=f"first seed (default {d.seed_start})")
    p.add_argument("--out", metavar="PATH", help=f"output CSV (default {d.out})")
    p.add_argument("--shifts", type=int, metavar="M", help="shift budget M (shifting experiment)")
    p.add_argument("--learner", choices=("zero", "pog"),
                   help=f"lower-bound learner (default {d.learner})")
    p.add_argument("--domain", choices=("ball", "box"), help=f"domain kind (default {d.domain})")
    p.add_argument("--radius", type=float, metavar="F", help=f"ball radius (default {d.radius})")
    p.add_argument("--regularizer", metavar="SPEC",
                   help="zero, indicator or l1:<weight> (default zero)")
    p.add_argument("--resolution", type=float, metavar="F",
                   help=f"oracle-check grid spacing (default {d.resolution})")
    p.add_argument("--no-timing", dest="timing", action="store_const", const=False,
                   help="write runtime_ms = 0 so reruns are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynreg", description=__doc__.split("\n\n")[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, kind in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"{kind.value} experiment" if kind else
                           "experiment named in the config or by --experiment")
        _add_common(p)
        if kind is None:
            p.add_argument("--experiment", choices=[k.value for k in ExperimentKind])
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kind = SUBCOMMANDS[args.command]
    overrides = {key: getattr(args, flag, None) for flag, key in FLAG_TO_KEY.items()}
    if overrides.get("gamma") is not None:
        overrides["gamma"] = _convert("gamma", overrides["gamma"])
    if overrides.get("horizons") is not None:
        overrides["horizons"] = _convert("horizons", overrides["horizons"])
    experiment = kind.value if kind else overrides.pop("experiment", None)
    overrides.pop("experiment", None)
    if args.config is None and experiment is not None and overrides.get("out") is None:
        overrides["out"] = f"{experiment}.csv"
    return parse_config(args.config, experiment, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        cfg = config_from_args(args)
        return run(cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameter as exc:
        print(f"dynreg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"dynreg: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"dynreg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
