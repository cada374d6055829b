"""Synthetic designs, ground-truth oracles, and selection-quality evaluation.

Reproducibility: all draws come from the Philox-4x64-10 counter-based
generator.  Replicate ``r`` of seed ``s`` uses the substream with key ``s``
and counter offset ``r * 2**128``, so replicates are order-independent and
identical across thread counts.  Gaussian variates are produced by applying
the rational-approximation normal quantile to Philox uniforms, which keeps
streams platform-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._stats import expit, norm_ppf
from .data import Dataset, ValidationError
from .estimators import ScoreEstimate, score_all
from .influence import infer_scores
from .nuisance import BasisConfig
from .ranking import rank, select_by_test, select_top_k

__all__ = [
    "SimScenario",
    "SimulatedData",
    "SimResult",
    "OracleValue",
    "substream",
    "generate",
    "gen_low_dim",
    "gen_high_dim",
    "gen_misspecified",
    "gen_uniform",
    "oracle_phi",
    "evaluate_selection",
    "roc_curve",
    "roc_auc",
    "coverage_experiment",
    "run_replicates",
]

KINDS = ("low_dim", "high_dim", "misspecified", "uniform_closed_form")
LABEL_CONFOUNDER = "confounder"
LABEL_PRECISION = "precision"
LABEL_INSTRUMENT = "instrument"
LABEL_SPURIOUS = "spurious"

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(64)


@dataclass(frozen=True)
class SimScenario:
    """Parameters of one synthetic design."""

    kind: str
    n: int = 500
    p: int = 30
    rho: float = 0.0
    theta: float = 0.0
    seed: int = 0
    replicates: int = 1
    # uniform_closed_form only: exposure / outcome coefficients and intercept.
    alphas: tuple[float, ...] | None = None
    betas: tuple[float, ...] | None = None
    beta0: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown scenario kind {self.kind!r}")
        if self.n < 2 or self.p < 1 or self.replicates < 1:
            raise ValidationError("n >= 2, p >= 1, replicates >= 1 required")
        if not (0.0 <= self.rho < 1.0):
            raise ValidationError("rho must lie in [0, 1)")
        if self.kind in ("low_dim", "high_dim", "misspecified") and self.p < 15:
            raise ValidationError(f"{self.kind} designs need p >= 15")
        if self.kind == "uniform_closed_form":
            if self.alphas is None or self.betas is None:
                raise ValidationError("uniform design needs alphas and betas")
            alphas = np.asarray(self.alphas, dtype=float)
            if alphas.size != self.p or len(self.betas) != self.p:
                raise ValidationError("alphas and betas must have length p")
            if np.any(alphas < 0.0) or alphas.sum() > 1.0 + 1e-12:
                raise ValidationError("uniform design needs alpha_j >= 0 with sum <= 1")


@dataclass(frozen=True)
class SimulatedData:
    dataset: Dataset
    labels: tuple[str, ...]

    def confounders(self) -> np.ndarray:
        return np.array([lab == LABEL_CONFOUNDER for lab in self.labels])


@dataclass(frozen=True)
class OracleValue:
    value: float
    mc_se: float


def substream(seed: int, replicate: int = 0) -> np.random.Generator:
    """Counter-derived Philox substream for one replicate."""
    bitgen = np.random.Philox(key=int(seed), counter=int(replicate) * (1 << 128))
    return np.random.Generator(bitgen)


def _uniforms(gen: np.random.Generator, size) -> np.ndarray:
    u = gen.random(size)
    return np.clip(u, 1e-300, 1.0 - 1e-16)


def _normals(gen: np.random.Generator, size) -> np.ndarray:
    return norm_ppf(_uniforms(gen, size))


def design_coefficients(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Exposure (alpha) and outcome (beta) coefficient vectors of the
    correlated-Gaussian designs: confounders 1-5, precision 6-10,
    instruments 11-15, remainder spurious."""
    alphas = np.zeros(p)
    betas = np.zeros(p)
    alphas[0:5] = 1.0
    alphas[10:15] = 1.0
    betas[0:10] = 0.6
    return alphas, betas


def _labels_gaussian(p: int) -> tuple[str, ...]:
    labels = [LABEL_SPURIOUS] * p
    for j in range(0, 5):
        labels[j] = LABEL_CONFOUNDER
    for j in range(5, 10):
        labels[j] = LABEL_PRECISION
    for j in range(10, 15):
        labels[j] = LABEL_INSTRUMENT
    return tuple(labels)


def _ar1_covariates(gen: np.random.Generator, n: int, p: int, rho: float) -> np.ndarray:
    z = _normals(gen, (n, p))
    if rho == 0.0:
        return z
    c = np.empty_like(z)
    c[:, 0] = z[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        c[:, j] = rho * c[:, j - 1] + scale * z[:, j]
    return c


def _make_dataset(y, e, c):
    names = tuple(f"c{j + 1}" for j in range(c.shape[1]))
    return Dataset(outcome=y, exposure=e.astype(np.int64), covariates=c, column_names=names)


def gen_low_dim(scenario: SimScenario, replicate: int = 0) -> SimulatedData:
    """Correlated-Gaussian design with linear outcome and logistic exposure."""
    gen = substream(scenario.seed, replicate)
    n, p = scenario.n, scenario.p
    c = _ar1_covariates(gen, n, p, scenario.rho)
    alphas, betas = design_coefficients(p)
    e = (_uniforms(gen, n) < expit(c @ alphas)).astype(np.int64)
    y = scenario.theta * e + c @ betas + _normals(gen, n)
    return SimulatedData(dataset=_make_dataset(y, e, c), labels=_labels_gaussian(p))


def gen_high_dim(scenario: SimScenario, replicate: int = 0) -> SimulatedData:
    """Same design at high dimension (the extra columns are spurious)."""
    return gen_low_dim(scenario, replicate)


def _mis_f(j: int, c: np.ndarray) -> np.ndarray:
    """Per-covariate exposure-model term of the misspecified design (0-based j)."""
    if 0 <= j < 5:
        return 3.0 * np.sin(3.0 * c)
    if 10 <= j < 15:
        return c**3 - c + 3.0
    return np.zeros_like(c)


def _mis_g(j: int, c: np.ndarray) -> np.ndarray:
    """Per-covariate outcome-model term of the misspecified design (0-based j)."""
    if 0 <= j < 5:
        return 1.8 * np.sin(3.0 * c)
    if 5 <= j < 10:
        return 1.8 * np.cos(4.0 * c)
    return np.zeros_like(c)


def gen_misspecified(scenario: SimScenario, replicate: int = 0) -> SimulatedData:
    """Nonlinear design: sinusoidal/cubic terms in both models, C ~ N(0, I)."""
    gen = substream(scenario.seed, replicate)
    n, p = scenario.n, scenario.p
    c = _normals(gen, (n, p))
    logits = np.full(n, -15.0)
    g_sum = np.zeros(n)
    for j in range(15):
        logits += _mis_f(j, c[:, j])
        g_sum += _mis_g(j, c[:, j])
    e = (_uniforms(gen, n) < expit(logits)).astype(np.int64)
    y = scenario.theta * e + g_sum + _normals(gen, n)
    return SimulatedData(dataset=_make_dataset(y, e, c), labels=_labels_gaussian(p))


def gen_uniform(scenario: SimScenario, replicate: int = 0) -> SimulatedData:
    """Uniform-covariate design with a linear-probability exposure model."""
    gen = substream(scenario.seed, replicate)
    n, p = scenario.n, scenario.p
    alphas = np.asarray(scenario.alphas, dtype=float)
    betas = np.asarray(scenario.betas, dtype=float)
    c = _uniforms(gen, (n, p))
    e = (_uniforms(gen, n) < c @ alphas).astype(np.int64)
    y = scenario.beta0 + scenario.theta * e + c @ betas + _normals(gen, n)
    labels = []
    for j in range(p):
        if alphas[j] > 0.0 and betas[j] != 0.0:
            labels.append(LABEL_CONFOUNDER)
        elif alphas[j] > 0.0:
            labels.append(LABEL_INSTRUMENT)
        elif betas[j] != 0.0:
            labels.append(LABEL_PRECISION)
        else:
            labels.append(LABEL_SPURIOUS)
    return SimulatedData(dataset=_make_dataset(y, e, c), labels=tuple(labels))


_GENERATORS = {
    "low_dim": gen_low_dim,
    "high_dim": gen_high_dim,
    "misspecified": gen_misspecified,
    "uniform_closed_form": gen_uniform,
}


def generate(scenario: SimScenario, replicate: int = 0) -> SimulatedData:
    return _GENERATORS[scenario.kind](scenario, replicate)


def uniform_closed_form_phi(scenario: SimScenario, j: int) -> float:
    """Analytic difference score of the uniform design: (alpha_j/3)(beta_j + theta alpha_j).

    Exact when the exposure weights sum to 1, which makes the marginal
    exposure rate exactly 1/2; for smaller weight totals use ``oracle_phi``.
    """
    return (scenario.alphas[j] / 3.0) * (scenario.betas[j] + scenario.theta * scenario.alphas[j])


def _gh_expit_mean(mean: np.ndarray, sd: float) -> np.ndarray:
    """E expit(mean + sd * Z) for Z ~ N(0,1), by 64-node Gauss-Hermite."""
    if sd == 0.0:
        return expit(mean)
    shifted = mean[:, None] + np.sqrt(2.0) * sd * _GH_NODES[None, :]
    return (expit(shifted) @ _GH_WEIGHTS) / np.sqrt(np.pi)


class _ArmAccumulator:
    """Streaming arm means of tau and the delta-method Monte-Carlo SE of their difference."""

    def __init__(self):
        self.m = 0
        self.s = np.zeros(6)  # n1, sum1, sumsq1, n0, sum0, sumsq0

    def add(self, tau: np.ndarray, e: np.ndarray) -> None:
        w1 = e.astype(float)
        w0 = 1.0 - w1
        self.m += tau.shape[0]
        self.s += (
            w1.sum(),
            (w1 * tau).sum(),
            (w1 * tau * tau).sum(),
            w0.sum(),
            (w0 * tau).sum(),
            (w0 * tau * tau).sum(),
        )

    def result(self) -> OracleValue:
        n1, s1, ss1, n0, s0, ss0 = self.s
        if n1 == 0 or n0 == 0:
            raise ValidationError("oracle Monte Carlo produced an empty exposure arm")
        m1, m0 = s1 / n1, s0 / n0
        p1, p0 = n1 / self.m, n0 / self.m
        v1 = (ss1 - 2.0 * m1 * s1 + m1 * m1 * n1) / self.m
        v0 = (ss0 - 2.0 * m0 * s0 + m0 * m0 * n0) / self.m
        var_d = v1 / p1**2 + v0 / p0**2
        return OracleValue(value=float(m1 - m0), mc_se=float(np.sqrt(max(var_d, 0.0) / self.m)))


def _oracle_gaussian(scenario, cols, mc_size, oracle_seed, chunk=1_000_000):
    p = scenario.p
    offsets = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    sigma = scenario.rho**offsets if scenario.rho > 0.0 else np.eye(p)
    if scenario.rho > 0.0:
        np.fill_diagonal(sigma, 1.0)
    alphas, betas = design_coefficients(p)
    cols = list(cols)
    sigma_gg = sigma[np.ix_(cols, cols)]
    sigma_g_all = sigma[cols, :]
    a = np.linalg.solve(sigma_gg, sigma_g_all @ alphas)  # E[L | C_G] weights
    b = np.linalg.solve(sigma_gg, sigma_g_all @ betas)  # outcome projection weights
    var_l = alphas @ sigma @ alphas
    s2 = max(var_l - (sigma_g_all @ alphas) @ a, 0.0)
    s = np.sqrt(s2)
    chol = np.linalg.cholesky(sigma_gg)

    gen = substream(oracle_seed, 0)
    acc = _ArmAccumulator()
    remaining = int(mc_size)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        cg = _normals(gen, (m, len(cols))) @ chol.T
        l_mean = cg @ a
        l = l_mean + s * _normals(gen, m)
        e = _uniforms(gen, m) < expit(l)
        tau = cg @ b
        if scenario.theta != 0.0:
            tau = tau + scenario.theta * _gh_expit_mean(l_mean, s)
        acc.add(tau, e)
    return acc.result()


def _oracle_uniform(scenario, cols, mc_size, oracle_seed, chunk=1_000_000):
    alphas = np.asarray(scenario.alphas, dtype=float)
    betas = np.asarray(scenario.betas, dtype=float)
    p = scenario.p
    cols = list(cols)
    out_mask = np.zeros(p, dtype=bool)
    out_mask[cols] = True
    rest_alpha_mean = alphas[~out_mask].sum() / 2.0
    rest_beta_mean = betas[~out_mask].sum() / 2.0

    gen = substream(oracle_seed, 0)
    acc = _ArmAccumulator()
    remaining = int(mc_size)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        c = _uniforms(gen, (m, p))
        e = _uniforms(gen, m) < c @ alphas
        cg = c[:, cols]
        tau = (
            scenario.beta0
            + cg @ betas[cols]
            + scenario.theta * (cg @ alphas[cols] + rest_alpha_mean)
            + rest_beta_mean
        )
        acc.add(tau, e)
    return acc.result()


def _oracle_misspecified(scenario, cols, mc_size, oracle_seed, chunk=200_000, inner=4096):
    if len(cols) != 1:
        raise ValidationError("misspecified oracle supports single covariates only")
    j = cols[0]
    p = scenario.p
    gen = substream(oracle_seed, 0)

    # Mean outcome contribution of the other covariates (independent normals).
    z = np.sqrt(2.0) * _GH_NODES
    w = _GH_WEIGHTS / np.sqrt(np.pi)
    g_rest = sum(float(_mis_g(k, z) @ w) for k in range(15) if k != j)

    if scenario.theta != 0.0:
        # Empirical distribution of the exposure-model terms excluding j.
        zr = _normals(gen, (inner, 1))  # fixed draw keeps tau_j a deterministic function
        r_inner = np.full(inner, -15.0)
        zi = _normals(gen, (inner, 15))
        for k in range(15):
            if k != j:
                r_inner += _mis_f(k, zi[:, k])

    acc = _ArmAccumulator()
    remaining = int(mc_size)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        c = _normals(gen, (m, 15))
        logits = np.full(m, -15.0)
        for k in range(15):
            logits += _mis_f(k, c[:, k])
        e = _uniforms(gen, m) < expit(logits)
        cj = c[:, j] if j < 15 else _normals(gen, m)
        tau = _mis_g(j, cj) + g_rest
        if scenario.theta != 0.0:
            fj = _mis_f(j, cj)
            p_e = np.empty(m)
            block = 8192  # bounds the m-by-inner expit buffer
            for lo in range(0, m, block):
                hi = min(lo + block, m)
                p_e[lo:hi] = expit(fj[lo:hi, None] + r_inner[None, :]).mean(axis=1)
            tau = tau + scenario.theta * p_e
        acc.add(tau, e)
    _ = p
    return acc.result()


def oracle_phi(scenario: SimScenario, target, mc_size: int = 10_000_000, oracle_seed: int = 777) -> OracleValue:
    """Ground-truth difference score from the known data-generating law.

    Independent of the estimator path: tau is evaluated from the generating
    equations (conditional laws integrated by 64-node Gauss-Hermite
    quadrature where a Gaussian residual predictor appears), and the arm
    means are taken over a fresh Monte-Carlo sample of ``mc_size`` draws.
    """
    if isinstance(target, (int, np.integer)):
        cols = (int(target),)
    else:
        cols = tuple(int(j) for j in target)
    if any(not 0 <= j < scenario.p for j in cols):
        raise ValidationError("oracle target out of range")
    if scenario.kind in ("low_dim", "high_dim"):
        return _oracle_gaussian(scenario, cols, mc_size, oracle_seed)
    if scenario.kind == "uniform_closed_form":
        return _oracle_uniform(scenario, cols, mc_size, oracle_seed)
    return _oracle_misspecified(scenario, cols, mc_size, oracle_seed)


def evaluate_selection(selected, labels) -> tuple[float, float]:
    """Sensitivity and specificity of a selected index set against truth labels.

    Only the confounder label counts as positive; precision and
    instrumental variables are negatives.
    """
    labels = list(labels)
    selected = set(int(j) for j in selected)
    confounders = {j for j, lab in enumerate(labels) if lab == LABEL_CONFOUNDER}
    others = set(range(len(labels))) - confounders
    sens = len(selected & confounders) / len(confounders) if confounders else 1.0
    spec = len(others - selected) / len(others) if others else 1.0
    return sens, spec


def _ranking_order(distances: np.ndarray) -> np.ndarray:
    # Descending distance, ties broken by ascending index (matches rank()).
    return np.lexsort((np.arange(distances.size), -distances))


def roc_curve(distances, labels) -> np.ndarray:
    """ROC points (sensitivity, 1 - specificity) sweeping top-K for K = 0..p."""
    distances = np.asarray(distances, dtype=float)
    order = _ranking_order(distances)
    points = [(0.0, 0.0)]
    selected: list[int] = []
    for j in order:
        selected.append(int(j))
        sens, spec = evaluate_selection(selected, labels)
        points.append((sens, 1.0 - spec))
    return np.asarray(points)


def roc_auc(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(points[:, 0], points[:, 1]))


@dataclass
class SimResult:
    """Per-replicate selection metrics and their aggregates."""

    scenario: SimScenario
    estimator_kind: str
    sensitivity: np.ndarray
    specificity: np.ndarray
    phi_hats: np.ndarray  # (replicates, p)
    se_hats: np.ndarray  # (replicates, p)
    coverage: np.ndarray | None  # (replicates, p) indicator, or None
    roc_mean: np.ndarray  # (p + 1, 2)
    oracle_values: np.ndarray | None = None
    aggregates: dict = field(default_factory=dict)


def run_replicates(
    scenario: SimScenario,
    estimator_kind: str = "tmle",
    basis: BasisConfig | None = None,
    score_kind: str = "difference",
    rule: tuple = ("alpha_test", 0.10),
    alpha: float = 0.10,
    threads: int | None = None,
    oracle_values=None,
) -> SimResult:
    """Run the scenario's replicates and collect selection metrics.

    ``oracle_values`` (length-p array) enables per-covariate CI coverage
    indicators; pass None to skip coverage.
    """
    basis = basis or BasisConfig()
    reps, p = scenario.replicates, scenario.p
    sens = np.empty(reps)
    spec = np.empty(reps)
    phis = np.empty((reps, p))
    ses = np.full((reps, p), np.nan)
    cover = np.full((reps, p), np.nan) if oracle_values is not None else None
    roc_sum = np.zeros((p + 1, 2))
    labels = None
    with_inference = estimator_kind in ("dr", "tmle")

    for r in range(reps):
        sim = generate(scenario, r)
        labels = sim.labels
        estimates = score_all(sim.dataset, estimator_kind, basis, threads=threads)
        inferences = [infer_scores(est, alpha) for est in estimates] if with_inference else None
        report = rank(estimates, score_kind, names=list(sim.dataset.column_names), inferences=inferences)
        if rule[0] == "top_k":
            report = select_top_k(report, int(rule[1]))
        else:
            report = select_by_test(report, float(rule[1]))
        selected = [row.id for row in report.rows if row.selected]
        s, sp = evaluate_selection(selected, labels)
        sens[r], spec[r] = s, sp
        phis[r] = [est.phi_hat for est in estimates]
        if with_inference:
            ses[r] = [inf.se_phi for inf in inferences]
            if cover is not None:
                for j, inf in enumerate(inferences):
                    lo, hi = inf.ci_phi
                    cover[r, j] = float(lo <= oracle_values[j] <= hi)
        null = 0.0 if score_kind == "difference" else 1.0
        distances = np.array(
            [abs(est.phi_hat - null) if score_kind == "difference"
             else (abs(est.psi_hat - null) if est.psi_hat is not None else -np.inf)
             for est in estimates]
        )
        roc_sum += roc_curve(distances, labels)

    roc_mean = roc_sum / reps
    aggregates = {
        "mean_sensitivity": float(sens.mean()),
        "mean_specificity": float(spec.mean()),
        "se_sensitivity": float(sens.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0,
        "se_specificity": float(spec.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0,
        "mean_phi": phis.mean(axis=0).tolist(),
        "mc_se_phi": (phis.std(axis=0, ddof=1) / np.sqrt(reps)).tolist() if reps > 1 else [0.0] * p,
        "labels": list(labels),
    }
    if cover is not None:
        aggregates["coverage"] = np.nanmean(cover, axis=0).tolist()
    return SimResult(
        scenario=scenario,
        estimator_kind=estimator_kind,
        sensitivity=sens,
        specificity=spec,
        phi_hats=phis,
        se_hats=ses,
        coverage=cover,
        roc_mean=roc_mean,
        oracle_values=None if oracle_values is None else np.asarray(oracle_values, dtype=float),
        aggregates=aggregates,
    )


def coverage_experiment(
    scenario: SimScenario,
    estimator_kind: str = "tmle",
    alpha: float = 0.10,
    replicates: int | None = None,
    columns=None,
    basis: BasisConfig | None = None,
    oracle_values=None,
    oracle_mc_size: int = 1_000_000,
    oracle_seed: int = 777,
) -> dict:
    """Empirical CI coverage of the oracle difference score, per covariate.

    Returns {column index: (coverage, binomial SE)}.
    """
    if estimator_kind not in ("dr", "tmle"):
        raise ValidationError("coverage experiment needs an influence-based estimator")
    basis = basis or BasisConfig()
    reps = replicates or scenario.replicates
    columns = list(range(scenario.p)) if columns is None else [int(j) for j in columns]
    if oracle_values is None:
        oracle_values = {
            j: oracle_phi(scenario, j, mc_size=oracle_mc_size, oracle_seed=oracle_seed).value
            for j in columns
        }
    hits = {j: 0 for j in columns}
    from .estimators import score_covariate

    for r in range(reps):
        sim = generate(scenario, r)
        for j in columns:
            est = score_covariate(sim.dataset, j, estimator_kind, basis)
            inf = infer_scores(est, alpha)
            lo, hi = inf.ci_phi
            if lo <= oracle_values[j] <= hi:
                hits[j] += 1
    out = {}
    for j in columns:
        cov = hits[j] / reps
        out[j] = (cov, float(np.sqrt(cov * (1.0 - cov) / reps)))
    return out
