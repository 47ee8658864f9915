"""Experiment orchestration: configs, repeated runs, grids, reports.

Configs are flat key/value text files with typed sections (experiment,
model, prior, summaries, sampler, abc, observed); see README for the key
reference.  All randomness flows from the experiment seed through named
substreams, so a rerun with the same config and seed reproduces every
output file (the wall-clock runtime recorded in the report is the one
exception).
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import SyntheticTarget, regression_adjust, rejection_abc
from .models import get_model, parse_prior, split_toplevel
from .posterior import make_context, pilot_standardizer
from .sampler import init_chain, run_chain, write_chain_csv
from .seeding import substream
from .summaries import make_summaries, summarize

METHODS = ("abcel", "synthetic", "rejection")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    method: str
    model: str
    true_theta: tuple[float, ...]
    n: int
    m: int
    seed: int
    summaries: tuple[str, ...]
    repeats: int = 1
    k: int | None = None
    prior: tuple[str, ...] | None = None
    standardize: bool = False
    entropy: str = "knn"
    n_iter: int = 10000
    n_burn: int = 10000
    init_max_tries: int = 200
    out: str | None = None
    observed_summary: tuple[float, ...] | None = None
    # rejection-ABC settings
    n_sims: int = 100000
    keep_quantile: float | None = 0.001
    tolerance: float | None = None
    adjust: str = "linear"
    ridge_penalty: float = 1e-6

    def validate(self) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.adjust not in ("none", "linear", "ridge"):
            raise ValueError("adjust must be none, linear or ridge")
        if self.entropy not in ("knn", "gaussian"):
            raise ValueError("entropy must be knn or gaussian")
        # fail fast on unresolvable names
        model = get_model(self.model)
        make_summaries(list(self.summaries))
        prior = parse_prior(list(self.prior)) if self.prior else model.default_prior()
        if prior.dim != len(self.true_theta):
            raise ValueError(
                f"prior dimension {prior.dim} != true_theta dimension {len(self.true_theta)}"
            )
        return self


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    exp = cp["experiment"]
    mod = cp["model"]

    kwargs = dict(
        name=exp.get("name"),
        method=exp.get("method"),
        seed=exp.getint("seed"),
        repeats=exp.getint("repeats", 1),
        out=exp.get("out", fallback=None),
        model=mod.get("name"),
        true_theta=_floats(mod.get("true_theta")),
        n=mod.getint("n"),
        m=mod.getint("m"),
        standardize=mod.getboolean("standardize", False),
        entropy=mod.get("entropy", "knn"),
        summaries=tuple(split_toplevel(cp["summaries"].get("use"))),
    )
    k_raw = mod.get("k", fallback=None)
    kwargs["k"] = int(k_raw) if k_raw not in (None, "") else None
    if cp.has_section("prior"):
        kwargs["prior"] = tuple(split_toplevel(cp["prior"].get("components")))
    if cp.has_section("sampler"):
        smp = cp["sampler"]
        kwargs["n_iter"] = smp.getint("n_iter", 10000)
        kwargs["n_burn"] = smp.getint("n_burn", 10000)
        kwargs["init_max_tries"] = smp.getint("init_max_tries", 200)
    if cp.has_section("abc"):
        abc = cp["abc"]
        kwargs["n_sims"] = abc.getint("n_sims", 100000)
        kq = abc.get("keep_quantile", fallback=None)
        kwargs["keep_quantile"] = float(kq) if kq not in (None, "") else None
        tol = abc.get("tolerance", fallback=None)
        kwargs["tolerance"] = float(tol) if tol not in (None, "") else None
        kwargs["adjust"] = abc.get("adjust", "linear")
        kwargs["ridge_penalty"] = abc.getfloat("ridge_penalty", 1e-6)
    if cp.has_section("observed"):
        kwargs["observed_summary"] = _floats(cp["observed"].get("summary"))
    return ExperimentConfig(**kwargs).validate()


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(c)) round-trips to c."""
    out = io.StringIO()

    def sec(title, pairs):
        out.write(f"[{title}]\n")
        for key, value in pairs:
            if value is None:
                continue
            out.write(f"{key} = {value}\n")
        out.write("\n")

    sec(
        "experiment",
        [
            ("name", cfg.name),
            ("method", cfg.method),
            ("seed", cfg.seed),
            ("repeats", cfg.repeats),
            ("out", cfg.out),
        ],
    )
    sec(
        "model",
        [
            ("name", cfg.model),
            ("true_theta", ", ".join(f"{v:.17g}" for v in cfg.true_theta)),
            ("n", cfg.n),
            ("m", cfg.m),
            ("k", cfg.k),
            ("standardize", str(cfg.standardize).lower()),
            ("entropy", cfg.entropy),
        ],
    )
    if cfg.prior:
        sec("prior", [("components", ", ".join(cfg.prior))])
    sec("summaries", [("use", ", ".join(cfg.summaries))])
    sec(
        "sampler",
        [
            ("n_iter", cfg.n_iter),
            ("n_burn", cfg.n_burn),
            ("init_max_tries", cfg.init_max_tries),
        ],
    )
    if cfg.method == "rejection":
        sec(
            "abc",
            [
                ("n_sims", cfg.n_sims),
                ("keep_quantile", cfg.keep_quantile),
                ("tolerance", cfg.tolerance),
                ("adjust", cfg.adjust),
                ("ridge_penalty", cfg.ridge_penalty),
            ],
        )
    if cfg.observed_summary is not None:
        sec("observed", [("summary", ", ".join(f"{v:.17g}" for v in cfg.observed_summary))])
    return out.getvalue()


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# experiment execution

@dataclass
class CoverageReport:
    """Per-coordinate coverage of equal-tailed 95% credible intervals."""

    coverage: np.ndarray
    avg_length: np.ndarray
    intervals: np.ndarray  # (repeats, d, 2)
    acceptance_rates: np.ndarray
    true_theta: np.ndarray


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: dict
    chain_files: list[str] = field(default_factory=list)
    coverage_report: CoverageReport | None = None


def _resolve(cfg: ExperimentConfig):
    model = get_model(cfg.model)
    prior = parse_prior(list(cfg.prior)) if cfg.prior else model.default_prior()
    summaries = make_summaries(list(cfg.summaries))
    return model, prior, summaries


def _build_context(cfg: ExperimentConfig, repeat: int):
    """Context for one repeat: fresh observed data unless pinned in config."""
    model, prior, summaries = _resolve(cfg)
    if cfg.observed_summary is not None:
        s_o = np.asarray(cfg.observed_summary, dtype=float)
    else:
        rng_obs = substream(cfg.seed, "observed", repeat)
        observed = model.simulate(np.asarray(cfg.true_theta), cfg.n, rng_obs)
        s_o = summarize(summaries, observed)

    standardizer = None
    if cfg.standardize:
        standardizer = pilot_standardizer(
            model, summaries, cfg.n, substream(cfg.seed, "pilot"), prior=prior
        )

    return make_context(
        model,
        summaries,
        s_o,
        n=cfg.n,
        m=cfg.m,
        k=cfg.k,
        prior=prior,
        standardizer=standardizer,
        entropy_mode=cfg.entropy,
        rng=substream(cfg.seed, "eval", repeat),
        init_max_tries=cfg.init_max_tries,
    )


def _chain_repeat(cfg: ExperimentConfig, repeat: int):
    """One repeat of a chain-based method; returns (thetas, acc_rate, chain)."""
    ctx = _build_context(cfg, repeat)
    target = SyntheticTarget(ctx) if cfg.method == "synthetic" else ctx
    rng_init = substream(cfg.seed, "init", repeat)
    start = init_chain(target, max_tries=cfg.init_max_tries, rng=rng_init)
    rng_chain = substream(cfg.seed, "chain", repeat)
    chain = run_chain(
        start, target, n_iter=cfg.n_iter, n_burn=cfg.n_burn, rng=rng_chain, seed_label=repeat
    )
    return chain


def _interval(draws: np.ndarray) -> np.ndarray:
    """(d, 2) equal-tailed 95% interval."""
    lo = np.quantile(draws, 0.025, axis=0)
    hi = np.quantile(draws, 0.975, axis=0)
    return np.stack([lo, hi], axis=1)


def _repeat_worker(args):
    cfg, repeat = args
    chain = _chain_repeat(cfg, repeat)
    return repeat, chain


def run_experiment(
    cfg: ExperimentConfig,
    out_dir=None,
    workers: int = 1,
    write_chains: bool = True,
) -> ExperimentResult:
    """Run the configured method for all repeats and write outputs.

    Writes one chain CSV per repeat (rejection: one CSV of accepted and
    adjusted draws) plus report.json into out_dir.
    """
    cfg.validate()
    t0 = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else (Path(cfg.out) if cfg.out else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    chain_files: list[str] = []
    if cfg.method in ("abcel", "synthetic"):
        jobs = [(cfg, i) for i in range(cfg.repeats)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = dict(pool.map(_repeat_worker, jobs))
            chains = [results[i] for i in range(cfg.repeats)]
        else:
            chains = [_chain_repeat(cfg, i) for i in range(cfg.repeats)]

        intervals = np.array([_interval(c.thetas()) for c in chains])
        acc = np.array([c.acceptance_rate for c in chains])
        true = np.asarray(cfg.true_theta)
        contains = (intervals[:, :, 0] <= true) & (true <= intervals[:, :, 1])
        coverage = contains.mean(axis=0)
        lengths = (intervals[:, :, 1] - intervals[:, :, 0]).mean(axis=0)
        cov_report = CoverageReport(
            coverage=coverage,
            avg_length=lengths,
            intervals=intervals,
            acceptance_rates=acc,
            true_theta=true,
        )
        if out is not None and write_chains:
            for i, chain in enumerate(chains):
                path = out / f"chain_{i:03d}.csv"
                write_chain_csv(chain, path)
                chain_files.append(str(path))
        report = {
            "name": cfg.name,
            "method": cfg.method,
            "repeats": cfg.repeats,
            "coverage": coverage.tolist(),
            "avg_length": lengths.tolist(),
            "acceptance_rate": float(acc.mean()),
            "per_repeat": [
                {
                    "interval": intervals[i].tolist(),
                    "contains": contains[i].tolist(),
                    "acceptance_rate": float(acc[i]),
                }
                for i in range(cfg.repeats)
            ],
        }
        result = ExperimentResult(cfg, report, chain_files, cov_report)
    else:  # rejection
        intervals = []
        all_contains = []
        for i in range(cfg.repeats):
            ctx = _build_context(cfg, i)
            rng = substream(cfg.seed, "abc", i)
            res = rejection_abc(
                ctx, cfg.n_sims, rng, tolerance=cfg.tolerance, quantile=cfg.keep_quantile
            )
            if cfg.adjust != "none":
                ridge = cfg.ridge_penalty if cfg.adjust == "ridge" else 0.0
                res = regression_adjust(res, ctx.observed_summary, ridge=ridge)
            draws = res.adjusted_theta if res.adjusted_theta is not None else res.accepted_theta
            intervals.append(_interval(draws))
            if out is not None and write_chains:
                path = out / f"abc_{i:03d}.csv"
                _write_abc_csv(res, path)
                chain_files.append(str(path))
        intervals = np.array(intervals)
        true = np.asarray(cfg.true_theta)
        contains = (intervals[:, :, 0] <= true) & (true <= intervals[:, :, 1])
        coverage = contains.mean(axis=0)
        lengths = (intervals[:, :, 1] - intervals[:, :, 0]).mean(axis=0)
        cov_report = CoverageReport(
            coverage=coverage,
            avg_length=lengths,
            intervals=intervals,
            acceptance_rates=np.full(cfg.repeats, math.nan),
            true_theta=true,
        )
        report = {
            "name": cfg.name,
            "method": cfg.method,
            "repeats": cfg.repeats,
            "coverage": coverage.tolist(),
            "avg_length": lengths.tolist(),
            "acceptance_rate": None,
            "per_repeat": [
                {"interval": intervals[i].tolist(), "contains": contains[i].tolist()}
                for i in range(cfg.repeats)
            ],
        }
        result = ExperimentResult(cfg, report, chain_files, cov_report)

    result.report["runtime"] = time.perf_counter() - t0
    if out is not None:
        (out / "report.json").write_text(json.dumps(result.report, indent=2, sort_keys=True))
    return result


def _write_abc_csv(res, path):
    theta = res.adjusted_theta if res.adjusted_theta is not None else res.accepted_theta
    d = theta.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter"] + [f"theta_{j + 1}" for j in range(d)] + ["log_post", "accepted"])
        for i, row in enumerate(theta):
            writer.writerow([i] + [f"{x:.17g}" for x in row] + ["nan", 1])


def coverage_study(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> CoverageReport:
    """Repeated-run frequentist coverage of 95% credible intervals."""
    result = run_experiment(cfg, out_dir=out_dir, workers=workers, write_chains=out_dir is not None)
    return result.coverage_report


def density_grid(
    cfg: ExperimentConfig,
    thetas,
    evals_per_point: int = 100,
    out_path=None,
) -> dict:
    """Mean and 95% band of (el_part + entropy_part) over a parameter grid.

    The mean and band are over the finite evaluations at each point;
    frac_feasible records how many evaluations were finite.  Points where
    every evaluation is -inf (including points outside the prior) come
    back as -inf rows.
    """
    cfg.validate()
    ctx = _build_context(cfg, 0)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    rows = []
    for idx, theta in enumerate(thetas):
        rng = substream(cfg.seed, "grid", idx)
        vals = np.empty(evals_per_point)
        for e in range(evals_per_point):
            lp = ctx.evaluate(theta, rng)
            vals[e] = lp.el_part + lp.entropy_part if lp.value > -math.inf else -math.inf
        finite = vals[np.isfinite(vals)]
        if finite.size == 0:
            rows.append((theta, -math.inf, -math.inf, -math.inf, 0.0))
        else:
            rows.append(
                (
                    theta,
                    float(finite.mean()),
                    float(np.quantile(finite, 0.025)),
                    float(np.quantile(finite, 0.975)),
                    finite.size / evals_per_point,
                )
            )

    d = thetas.shape[1]
    grid = {
        "theta": thetas,
        "mean_logpost": np.array([r[1] for r in rows]),
        "lo95": np.array([r[2] for r in rows]),
        "hi95": np.array([r[3] for r in rows]),
        "frac_feasible": np.array([r[4] for r in rows]),
    }
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [f"theta_{j + 1}" for j in range(d)]
                + ["mean_logpost", "lo95", "hi95", "frac_feasible"]
            )
            for theta, mean, lo, hi, frac in rows:
                writer.writerow(
                    [f"{x:.17g}" for x in theta]
                    + [f"{mean:.17g}", f"{lo:.17g}", f"{hi:.17g}", f"{frac:.17g}"]
                )
    return grid


def export_plot_csvs(directory, bins: int = 60) -> list[str]:
    """Plot-ready CSVs from a results directory.

    Aggregates all chain CSVs into one histogram CSV per parameter
    (hist_theta_j.csv: bin_lo, bin_hi, density) and writes intervals.csv
    from report.json when present.
    """
    directory = Path(directory)
    written: list[str] = []
    chain_paths = sorted(directory.glob("chain_*.csv")) + sorted(directory.glob("abc_*.csv"))
    if chain_paths:
        columns = None
        rows = []
        for path in chain_paths:
            with open(path) as fh:
                reader = csv.reader(fh)
                header = next(reader)
                theta_cols = [j for j, name in enumerate(header) if name.startswith("theta_")]
                if columns is None:
                    columns = [header[j] for j in theta_cols]
                rows.extend([[float(line[j]) for j in theta_cols] for line in reader])
        draws = np.array(rows)
        for j, name in enumerate(columns):
            counts, edges = np.histogram(draws[:, j], bins=bins, density=True)
            out = directory / f"hist_{name}.csv"
            with open(out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_lo", "bin_hi", "density"])
                for lo, hi, dens in zip(edges[:-1], edges[1:], counts):
                    writer.writerow([f"{lo:.17g}", f"{hi:.17g}", f"{dens:.17g}"])
            written.append(str(out))
    report_path = directory / "report.json"
    if report_path.exists():
        report = json.loads(report_path.read_text())
        out = directory / "intervals.csv"
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["repeat", "coordinate", "lo", "hi"])
            for i, rep in enumerate(report.get("per_repeat", [])):
                for j, (lo, hi) in enumerate(rep["interval"]):
                    writer.writerow([i, j + 1, f"{lo:.17g}", f"{hi:.17g}"])
        written.append(str(out))
    return written
