"""Population generators and Monte Carlo misclassification experiments.

Random numbers: replication ``r`` at dimension ``p`` of a run seeded with
``seed`` draws from ``Philox(SeedSequence(seed, spawn_key=(p, r, stream)))``
with ``stream = 0`` for the training samples and ``stream = 1`` for the test
observations. Results therefore do not depend on worker count or scheduling.
Within a stream the classes are drawn in order; each class draws its normal
block ``(n_i, p)`` first and, for the t family, its ``n_i`` chi-square draws
second.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .discriminant import FULL_COV_VARIANTS, FitOptions, TrainedClassifier, decide, fit_summaries, normalize_variant, oracle_models
from .errors import ConfigError, HDQCError
from .feature_selection import deviation_statistic, select_features, theta_population
from .summaries import fit_class_summary
from .theory import CHOICES, PopulationModel, asymptotic_error, population_specs, score_gap_moments

SCENARIOS = ("fig1a", "fig1b", "fig2c", "fig2d", "sim5a", "sim5b", "sim5c", "sim5d")


# -- integer rules ---------------------------------------------------------


def ceil_pow_2_3(p: int) -> int:
    """Smallest m with m^3 >= p^2, i.e. ceil(p^(2/3)) without rounding error."""
    m = max(1, round(p ** (2.0 / 3.0)))
    while m**3 < p * p:
        m += 1
    while m > 1 and (m - 1) ** 3 >= p * p:
        m -= 1
    return m


def ceil_sqrt(p: int) -> int:
    return 0 if p == 0 else math.isqrt(p - 1) + 1


def ceil_log2(p: int) -> int:
    return (p - 1).bit_length()


def sample_sizes(rule, p: int) -> tuple[int, int]:
    """``fixed`` pair, ``log2`` -> (log2 p, 2 log2 p), ``logsq`` -> (ceil((ln p)^2), twice that)."""
    if isinstance(rule, (list, tuple)):
        n = tuple(int(v) for v in rule)
    elif rule == "log2":
        a = ceil_log2(p)
        n = (a, 2 * a)
    elif rule == "logsq":
        a = math.ceil(math.log(p) ** 2)
        n = (a, 2 * a)
    else:
        raise ConfigError(f"unknown sample-size rule {rule!r}")
    if min(n) < 2:
        raise ConfigError(f"sample-size rule {rule!r} gives n={n} at p={p}; every class needs n >= 2")
    return n


def mean_vector(rule: str, p: int) -> np.ndarray:
    mu = np.zeros(p)
    if rule == "zero":
        pass
    elif rule == "first_p23":
        mu[: ceil_pow_2_3(p)] = 1.0
    elif rule == "last_p23":
        mu[p - ceil_pow_2_3(p) :] = 1.0
    elif rule == "last_sqrt":
        mu[p - ceil_sqrt(p) :] = 1.0
    else:
        raise ConfigError(f"unknown mean rule {rule!r}")
    return mu


# -- covariance builders ---------------------------------------------------


def power_decay_covariance(p: int, rho: float = 0.3, exponent: float = 1.0 / 3.0) -> np.ndarray:
    """B R B with R_st = rho^{|s-t|^exponent} and B = diag{(0.5 + j/(p+1))^{1/2}}."""
    j = np.arange(p)
    R = rho ** (np.abs(j[:, None] - j[None, :]) ** exponent)
    b = np.sqrt(0.5 + np.arange(1, p + 1) / (p + 1))
    return b[:, None] * R * b[None, :]


def build_covariance(builder: dict, p: int) -> np.ndarray:
    """Materialize a covariance from a JSON-style builder.

    Builders: ``{"type": "power_decay", "rho", "exponent"}``,
    ``{"type": "identity", "scale"}``, ``{"type": "scaled", "factor", "base"}``,
    ``{"type": "tail_inflated", "base", "factor"}`` (B Sigma B where the last
    ceil(sqrt p) entries of the diagonal B are ``sqrt(factor)``) and
    ``{"type": "diagonal", "values"}``.
    """
    kind = builder.get("type")
    if kind == "power_decay":
        S = power_decay_covariance(p, builder.get("rho", 0.3), builder.get("exponent", 1.0 / 3.0))
    elif kind == "identity":
        S = float(builder.get("scale", 1.0)) * np.eye(p)
    elif kind == "scaled":
        S = float(builder["factor"]) * build_covariance(builder["base"], p)
    elif kind == "tail_inflated":
        b = np.ones(p)
        b[p - ceil_sqrt(p) :] = math.sqrt(float(builder.get("factor", 2.0)))
        S = b[:, None] * build_covariance(builder["base"], p) * b[None, :]
    elif kind == "diagonal":
        v = np.asarray(builder["values"], dtype=float)
        if v.shape != (p,):
            raise ConfigError(f"diagonal builder has {v.size} values, need {p}")
        S = np.diag(v)
    else:
        raise ConfigError(f"unknown covariance builder {kind!r}")
    return S


# -- scenarios -------------------------------------------------------------


_SIGMA1 = {"type": "power_decay", "rho": 0.3, "exponent": 1.0 / 3.0}

_CATALOG = {
    "fig1a": dict(sizes="log2", means=["zero", "first_p23"], covariances=[_SIGMA1, _SIGMA1], grid=[2**s for s in range(3, 13)]),
    "fig1b": dict(sizes="log2", means=["zero", "last_p23"], covariances=[_SIGMA1, _SIGMA1], grid=[2**s for s in range(3, 13)]),
    "fig2c": dict(sizes=[5, 10], means=["zero", "zero"], covariances=[_SIGMA1, {"type": "scaled", "factor": 1.5, "base": _SIGMA1}], grid=[2**s for s in range(3, 13)]),
    "fig2d": dict(sizes=[5, 10], means=["zero", "zero"], covariances=[_SIGMA1, {"type": "identity", "scale": 1.2}], grid=[2**s for s in range(3, 13)]),
    "sim5a": dict(sizes=[10, 20], means=["zero", "last_sqrt"], covariances=[_SIGMA1, _SIGMA1], grid=[2**s for s in range(3, 11)]),
    "sim5b": dict(sizes="logsq", means=["zero", "last_sqrt"], covariances=[_SIGMA1, _SIGMA1], grid=[2**s for s in range(3, 11)]),
    "sim5c": dict(sizes="logsq", means=["zero", "last_sqrt"], covariances=[_SIGMA1, {"type": "tail_inflated", "factor": 2.0, "base": _SIGMA1}], grid=[2**s for s in range(3, 11)]),
    "sim5d": dict(sizes="logsq", means=["zero", "last_sqrt"], covariances=[_SIGMA1, {"type": "tail_inflated", "factor": 2.0, "base": _SIGMA1}], grid=[500], family="student_t", nu=8.0),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """A generative two-class (or l-class) population model plus run settings."""

    scenario: str = "custom"
    grid: tuple[int, ...] = (64,)
    sizes: object = "log2"
    means: tuple[str, ...] = ("zero", "first_p23")
    covariances: tuple[dict, ...] = (_SIGMA1, _SIGMA1)
    family: str = "gaussian"
    nu: float | None = None
    replications: int = 2000
    seed: int = 0
    fixed_training: bool = False

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(p) for p in self.grid))
        object.__setattr__(self, "means", tuple(self.means))
        object.__setattr__(self, "covariances", tuple(self.covariances))
        if isinstance(self.sizes, list):
            object.__setattr__(self, "sizes", tuple(self.sizes))
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.grid or min(self.grid) < 1:
            raise ConfigError("dimension grid must be a nonempty list of positive integers")
        if len(self.means) != len(self.covariances) or len(self.means) < 2:
            raise ConfigError("need one mean rule and one covariance builder per class, at least two classes")
        if self.family not in ("gaussian", "student_t"):
            raise ConfigError(f"unknown distribution family {self.family!r}")
        if self.family == "student_t" and not (self.nu is not None and self.nu > 2):
            raise ConfigError("student_t needs nu > 2 for a finite covariance")

    @classmethod
    def from_catalog(cls, scenario: str, **overrides) -> "ScenarioConfig":
        if scenario not in _CATALOG:
            raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
        base = dict(_CATALOG[scenario])
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(scenario=scenario, **base)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        scenario = d.get("scenario", "custom")
        if scenario in _CATALOG:
            d.pop("scenario")
            return cls.from_catalog(scenario, **d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = list(self.grid)
        d["sizes"] = list(self.sizes) if isinstance(self.sizes, tuple) else self.sizes
        d["means"] = list(self.means)
        d["covariances"] = list(self.covariances)
        return d

    def resolve(self, p: int) -> "ResolvedScenario":
        mu = tuple(mean_vector(rule, p) for rule in self.means)
        sigma = tuple(build_covariance(b, p) for b in self.covariances)
        pop = PopulationModel(mu, sigma)
        truth = None
        if pop.k == 2:
            theta = theta_population(mu[0], mu[1], pop.diagonals[0], pop.diagonals[1])
            truth = np.flatnonzero(theta > 0)
        n = sample_sizes(self.sizes, p)
        if len(n) != pop.k:
            raise ConfigError(f"{len(n)} sample sizes for {pop.k} classes")
        return ResolvedScenario(self.scenario, p, pop, n, self.family, self.nu, truth)


@dataclass(frozen=True, eq=False)
class ResolvedScenario:
    scenario: str
    p: int
    pop: PopulationModel
    n: tuple[int, ...]
    family: str = "gaussian"
    nu: float | None = None
    true_features: np.ndarray | None = None

    @property
    def p_star(self) -> int | None:
        return None if self.true_features is None else int(self.true_features.size)


def scenario_catalog(scenario: str, p: int, **overrides) -> ResolvedScenario:
    return ScenarioConfig.from_catalog(scenario, **overrides).resolve(p)


# -- sampling --------------------------------------------------------------


def rng_for(seed: int, p: int, r: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(p, r, stream))))


def sample_population(mu, factor, n: int, rng: np.random.Generator, family: str = "gaussian", nu: float | None = None) -> np.ndarray:
    """``n`` draws with mean ``mu`` and covariance ``factor @ factor.T``.

    Gaussian: mu + L z. Student t: mu + L' z (nu / w)^{1/2} with w ~ chi2(nu)
    and L' = L ((nu - 2) / nu)^{1/2}, so the covariance is exactly L L^T.
    """
    mu = np.asarray(mu, dtype=float)
    Z = rng.standard_normal((n, mu.shape[0]))
    X = Z @ np.asarray(factor).T
    if family == "student_t":
        if not (nu is not None and nu > 2):
            raise ConfigError("student_t needs nu > 2")
        w = rng.chisquare(nu, size=n)
        X *= np.sqrt((nu - 2.0) / nu) * np.sqrt(nu / w)[:, None]
    elif family != "gaussian":
        raise ConfigError(f"unknown distribution family {family!r}")
    return X + mu


def draw_training(sc: ResolvedScenario, rng: np.random.Generator) -> list[np.ndarray]:
    return [sample_population(sc.pop.mu[i], sc.pop.factors[i], sc.n[i], rng, sc.family, sc.nu) for i in range(sc.pop.k)]


def draw_test(sc: ResolvedScenario, rng: np.random.Generator) -> np.ndarray:
    return np.vstack([sample_population(sc.pop.mu[i], sc.pop.factors[i], 1, rng, sc.family, sc.nu) for i in range(sc.pop.k)])


# -- Monte Carlo -----------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloRow:
    scenario: str
    p: int
    classifier: str
    e: tuple[float, ...]
    ebar: float
    se: float
    replications: int
    failures: int
    phi_overlay: float | None


@dataclass(frozen=True)
class MonteCarloReport:
    config: ScenarioConfig
    classifiers: tuple[str, ...]
    rows: tuple[MonteCarloRow, ...]
    fit_options: FitOptions = field(default_factory=FitOptions)
    wall_time: float = field(default=0.0, compare=False)

    def row(self, p: int, classifier: str) -> MonteCarloRow:
        for r in self.rows:
            if r.p == p and r.classifier == classifier:
                return r
        raise KeyError((p, classifier))

    def header(self) -> list[str]:
        opts = {"gamma": self.fit_options.gamma, "M": self.fit_options.threshold.constant_M, "keep_diagonal": self.fit_options.threshold.keep_diagonal, "strict_ties": self.fit_options.strict_ties}
        return [
            f"# seed={self.config.seed} replications={self.config.replications} classifiers={','.join(self.classifiers)}",
            f"# config={json.dumps(self.config.to_dict(), sort_keys=True)}",
            f"# options={json.dumps(opts, sort_keys=True)}",
        ]

    def to_csv(self) -> str:
        lines = self.header() + ["scenario,p,classifier,e1,e2,ebar,se,failures,phi_overlay"]
        for r in self.rows:
            phi = "" if r.phi_overlay is None else repr(r.phi_overlay)
            lines.append(f"{r.scenario},{r.p},{r.classifier},{r.e[0]!r},{r.e[1]!r},{r.ebar!r},{r.se!r},{r.failures},{phi}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        rows = [
            {"scenario": r.scenario, "p": r.p, "classifier": r.classifier, "e1": r.e[0], "e2": r.e[1], "ebar": r.ebar, "se": r.se, "replications": r.replications, "failures": r.failures, "phi_overlay": r.phi_overlay}
            for r in self.rows
        ]
        return json.dumps({"seed": self.config.seed, "config": self.config.to_dict(), "classifiers": list(self.classifiers), "rows": rows}, sort_keys=True, indent=1) + "\n"


# theory overlays for sample variants use the population analogue of their A
_OVERLAY_CHOICE = {"I": "I", "II": "II", "III": "III", "IV": "IV", "dbda": "I", "gqda": "II", "dqda_bc": "III", "sample_precision": "IV"}


def overlay_error(pop: PopulationModel, choice: str, n: Sequence[int]) -> float:
    """Mean over the two classes of Phi(-Delta_i / delta_i)."""
    D, d = score_gap_moments(pop, population_specs(pop, choice), n)
    errs = [asymptotic_error(D[i], d[i]) for i in (0, 1)]
    return 0.5 * (errs[0] + errs[1])


class _Context:
    """Per-dimension state shared by every replication."""

    def __init__(self, config: ScenarioConfig, p: int, classifiers: Sequence[str], options: FitOptions):
        self.config = config
        self.sc = config.resolve(p)
        self.classifiers = tuple(classifiers)
        self.options = options
        self.oracle_specs = {c: population_specs(self.sc.pop, c) for c in self.classifiers if c in CHOICES}
        self.full_cov = any(c in FULL_COV_VARIANTS for c in self.classifiers)


_WORKER_CTX: _Context | None = None


def _init_worker(config, p, classifiers, options):
    global _WORKER_CTX
    _WORKER_CTX = _Context(config, p, classifiers, options)


def _run_chunk(rs: Sequence[int]) -> np.ndarray:
    return np.stack([_replicate(_WORKER_CTX, r) for r in rs])


def _fit_one(ctx: _Context, name: str, train, summaries, full_summaries) -> TrainedClassifier:
    k = ctx.sc.pop.k
    labels = tuple(str(i + 1) for i in range(k))
    if name in CHOICES:
        centered = [x - s.mean for x, s in zip(train, summaries)]
        return TrainedClassifier(name, oracle_models(ctx.oracle_specs[name], summaries, labels, centered), strict_ties=ctx.options.strict_ties)
    use = full_summaries if name in FULL_COV_VARIANTS else summaries
    return fit_summaries(use, name, ctx.options, labels)


def _replicate(ctx: _Context, r: int) -> np.ndarray:
    """Per-classifier error indicators for one replication; -1 marks a failed fit."""
    p, seed = ctx.sc.p, ctx.config.seed
    train = draw_training(ctx.sc, rng_for(seed, p, 0 if ctx.config.fixed_training else r, 0))
    X0 = draw_test(ctx.sc, rng_for(seed, p, r, 1))
    summaries = [fit_class_summary(x) for x in train]
    full_summaries = [fit_class_summary(x, full_cov=True) for x in train] if ctx.full_cov else None
    k = ctx.sc.pop.k
    out = np.full((len(ctx.classifiers), k), -1, dtype=np.int8)
    for c, name in enumerate(ctx.classifiers):
        try:
            model = _fit_one(ctx, name, train, summaries, full_summaries)
            idx, _ = decide(model.scores(X0), ctx.options.strict_ties)
        except (HDQCError, np.linalg.LinAlgError):
            continue
        out[c] = (idx != np.arange(k)).astype(np.int8)
    return out


def _run_dimension(ctx: _Context, workers: int) -> np.ndarray:
    config, p = ctx.config, ctx.sc.p
    R = config.replications
    if workers <= 1:
        return np.stack([_replicate(ctx, r) for r in range(R)])
    chunk = max(1, math.ceil(R / (4 * workers)))
    chunks = [range(a, min(a + chunk, R)) for a in range(0, R, chunk)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(config, p, ctx.classifiers, ctx.options)) as ex:
        return np.concatenate(list(ex.map(_run_chunk, chunks)))


def run_monte_carlo(
    config: ScenarioConfig,
    classifiers: Sequence[str],
    options: FitOptions = FitOptions(),
    workers: int = 1,
    overlay: bool = True,
) -> MonteCarloReport:
    """Error rates e(i) = sum_r P_ir / R over fresh training sets and one fresh x0 per class.

    Replications where a classifier fails to fit are excluded for that
    classifier and counted in ``failures``. ``se`` is {ebar (1 - ebar) / R}^{1/2}.
    """
    classifiers = tuple(normalize_variant(c) for c in classifiers)
    if not classifiers:
        raise ConfigError("no classifiers requested")
    t0 = time.perf_counter()
    rows = []
    for p in config.grid:
        ctx = _Context(config, p, classifiers, options)
        P = _run_dimension(ctx, workers)
        sc = ctx.sc
        for c, name in enumerate(classifiers):
            ok = np.all(P[:, c, :] >= 0, axis=1)
            R = int(ok.sum())
            failures = int(P.shape[0] - R)
            if R:
                e = tuple(float(v) for v in P[ok, c, :].mean(axis=0))
            else:
                e = tuple(math.nan for _ in range(P.shape[2]))
            ebar = float(sum(e) / len(e))
            se = math.sqrt(ebar * (1 - ebar) / R) if R else math.nan
            phi = None
            if overlay and sc.pop.k == 2 and name in _OVERLAY_CHOICE:
                try:
                    phi = overlay_error(sc.pop, _OVERLAY_CHOICE[name], sc.n)
                except HDQCError:
                    phi = None
            rows.append(MonteCarloRow(config.scenario, p, name, e, ebar, se, R, failures, phi))
    return MonteCarloReport(config, classifiers, tuple(rows), options, time.perf_counter() - t0)


# -- theory overlays over a grid -------------------------------------------


@dataclass(frozen=True)
class TheoryRow:
    p: int
    classifier: str
    cls: int
    delta: float
    delta_small: float
    phi_error: float
    bayes_error: float | None


def theory_grid(config: ScenarioConfig, choices: Sequence[str]) -> list[TheoryRow]:
    from .theory import bayes_error_equal_cov, bayes_error_unequal_cov_gaussian, covariances_equal

    rows = []
    for p in config.grid:
        sc = config.resolve(p)
        pop = sc.pop
        if covariances_equal(pop):
            b = bayes_error_equal_cov(pop)
            bayes = (b, b)
        elif np.any(pop.mean_diff != 0):
            bayes = tuple(bayes_error_unequal_cov_gaussian(pop, i) for i in (0, 1))
        else:
            bayes = (None, None)
        for choice in choices:
            D, d = score_gap_moments(pop, population_specs(pop, choice), sc.n)
            for i in (0, 1):
                rows.append(TheoryRow(p, choice, i + 1, D[i], d[i], asymptotic_error(D[i], d[i]), bayes[i]))
    return rows


# -- feature-selection experiments -----------------------------------------


@dataclass(frozen=True)
class SelectionExperiment:
    p: int
    replications: int
    recovery_rate: float
    mean_missed: float
    mean_false: float
    deviation_median: float
    deviations: np.ndarray = field(repr=False, compare=False)


def feature_selection_experiment(scenario: ResolvedScenario, replications: int, seed: int = 0, gamma: float = 0.5) -> SelectionExperiment:
    """Empirical P(selected = true set) and the deviation statistic over fresh draws."""
    if scenario.true_features is None:
        raise ConfigError("the scenario has no ground-truth feature set")
    pop = scenario.pop
    theta = theta_population(pop.mu[0], pop.mu[1], pop.diagonals[0], pop.diagonals[1])
    truth = set(scenario.true_features.tolist())
    hits, missed, false, devs = 0, 0, 0, []
    for r in range(replications):
        train = draw_training(scenario, rng_for(seed, scenario.p, r, 0))
        summaries = [fit_class_summary(x) for x in train]
        res = select_features(summaries, gamma, scenario.p)
        sel = set(res.selected.tolist())
        hits += sel == truth
        missed += len(truth - sel)
        false += len(sel - truth)
        devs.append(deviation_statistic(res.theta_hat, theta, min(scenario.n), scenario.p))
    devs = np.array(devs)
    R = replications
    return SelectionExperiment(scenario.p, R, hits / R, missed / R, false / R, float(np.median(devs)), devs)


def default_workers() -> int:
    return os.cpu_count() or 1
