"""Confounding-score estimators: naive plug-in, one-step doubly robust, TMLE.

All estimators target theta = E{I(E=1) tau(C)} together with mu_O = E(O)
and mu_E = E(E); the difference score phi and ratio score psi are smooth
functions of the triple:

    phi = theta / mu_E - (mu_O - theta) / (1 - mu_E)
    psi = [theta / mu_E] / [(mu_O - theta) / (1 - mu_E)]

For a bounded outcome the whole computation runs on the rescaled [0, 1]
outcome and every reported quantity is mapped back through the recorded
affine transform.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import influence
from ._stats import expit, logit
from .data import Dataset, ValidationError
from .nuisance import (
    PROB_CLIP,
    BasisConfig,
    fit_nuisances,
    fit_saturated,
    fit_tau,
)

__all__ = [
    "ScoreEstimate",
    "TmleState",
    "theta_naive",
    "plugin_scores_om",
    "plugin_scores_ps",
    "theta_dr",
    "tmle_theta",
    "fluctuate_pi",
    "fluctuate_q",
    "scores_from_theta",
    "score_covariate",
    "score_all",
    "score_groups",
]

PSI_DENOM_TOL = 1e-12
ESTIMATOR_KINDS = ("plugin_om", "plugin_ps", "dr", "tmle")


@dataclass
class ScoreEstimate:
    """Point estimates and per-observation influence values for one target."""

    covariate_id: object
    estimator_kind: str
    theta_hat: float
    mu_o_hat: float
    mu_e_hat: float
    phi_hat: float
    psi_hat: float | None
    influence_values: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def psi_defined(self) -> bool:
        return self.psi_hat is not None


@dataclass
class TmleState:
    """Mutable iteration state of the TMLE fluctuation loop."""

    pi_values: np.ndarray
    q0_values: np.ndarray
    q1_values: np.ndarray
    eps1: float = 0.0
    eps2: float = 0.0
    iteration: int = 0
    trace: list = field(default_factory=list)


def scores_from_theta(theta: float, mu_o: float, mu_e: float) -> tuple[float, float | None]:
    """Map (theta, mu_O, mu_E) to (phi, psi); psi is None when its denominator vanishes."""
    if not (0.0 < mu_e < 1.0):
        raise ValidationError("mu_E must lie strictly inside (0, 1)")
    exposed = theta / mu_e
    unexposed = (mu_o - theta) / (1.0 - mu_e)
    phi = exposed - unexposed
    if abs(mu_o - theta) < PSI_DENOM_TOL:
        return phi, None
    return phi, exposed / unexposed


def theta_naive(dataset: Dataset, fit) -> float:
    """Naive plug-in: sample mean of I(E=1) tau_hat(C)."""
    tau = fit.tau_at(dataset.covariates[:, fit.columns])
    return float(np.mean(dataset.exposure * tau))


def _both_arms(dataset: Dataset) -> None:
    if not (0.0 < dataset.exposure.mean() < 1.0):
        raise ValidationError("both exposure arms must be present")


def _original_scale(dataset: Dataset, values: np.ndarray) -> np.ndarray:
    return dataset.outcome_scale * values + dataset.outcome_offset


def plugin_scores_om(dataset: Dataset, fit) -> ScoreEstimate:
    """Plug-in scores from the outcome-regression route (arm means of tau_hat)."""
    _both_arms(dataset)
    tau = _original_scale(dataset, fit.tau_at(dataset.covariates[:, fit.columns]))
    mu_e = float(dataset.exposure.mean())
    theta = float(np.mean(dataset.exposure * tau))
    # Under the outcome-model plug-in measure, mu_O is the mean of tau over
    # the empirical covariate distribution; this keeps phi identical to the
    # within-arm mean difference.
    mu_o = float(tau.mean())
    phi, psi = scores_from_theta(theta, mu_o, mu_e)
    return ScoreEstimate(
        covariate_id=fit.columns[0] if len(fit.columns) == 1 else fit.columns,
        estimator_kind="plugin_om",
        theta_hat=theta,
        mu_o_hat=mu_o,
        mu_e_hat=mu_e,
        phi_hat=phi,
        psi_hat=psi,
        diagnostics={"warnings": list(fit.warnings)},
    )


def plugin_scores_ps(dataset: Dataset, fit) -> ScoreEstimate:
    """Plug-in scores from the propensity route: E{O pi_hat(C)} / mean(E) etc."""
    _both_arms(dataset)
    pi = fit.pi_at(dataset.covariates[:, fit.columns])
    o = _original_scale(dataset, dataset.outcome)
    mu_e = float(dataset.exposure.mean())
    theta = float(np.mean(o * pi))
    mu_o = float(o.mean())
    phi, psi = scores_from_theta(theta, mu_o, mu_e)
    return ScoreEstimate(
        covariate_id=fit.columns[0] if len(fit.columns) == 1 else fit.columns,
        estimator_kind="plugin_ps",
        theta_hat=theta,
        mu_o_hat=mu_o,
        mu_e_hat=mu_e,
        phi_hat=phi,
        psi_hat=psi,
        diagnostics={"warnings": list(fit.warnings)},
    )


def _finalize_efficient(
    dataset: Dataset,
    kind: str,
    covariate_id,
    theta: float,
    pi: np.ndarray,
    tau: np.ndarray,
    diagnostics: dict,
) -> ScoreEstimate:
    """Assemble scores plus influence values from final fitted values.

    ``tau`` and ``theta`` are expected on the original outcome scale.
    """
    o = _original_scale(dataset, dataset.outcome)
    e = dataset.exposure
    mu_o = float(o.mean())
    mu_e = float(e.mean())
    phi, psi = scores_from_theta(theta, mu_o, mu_e)
    d_theta = influence.eic_theta(o, e, pi, tau, theta)
    d_mu_o = influence.ic_mu(o, mu_o)
    d_mu_e = influence.ic_mu(e.astype(float), mu_e)
    d_phi = influence.ic_phi(d_theta, d_mu_o, d_mu_e, theta, mu_o, mu_e)
    values = {
        "d_theta": d_theta,
        "d_mu_o": d_mu_o,
        "d_mu_e": d_mu_e,
        "d_phi": d_phi,
    }
    if psi is not None and theta > 0.0:
        values["d_psi"] = influence.ic_psi(d_theta, d_mu_o, d_mu_e, theta, mu_o, mu_e)
    else:
        diagnostics.setdefault("warnings", []).append(
            "ratio-score influence curve undefined (theta <= 0 or vanishing denominator)"
        )
    return ScoreEstimate(
        covariate_id=covariate_id,
        estimator_kind=kind,
        theta_hat=theta,
        mu_o_hat=mu_o,
        mu_e_hat=mu_e,
        phi_hat=phi,
        psi_hat=psi,
        influence_values=values,
        diagnostics=diagnostics,
    )


def theta_dr(dataset: Dataset, fit) -> ScoreEstimate:
    """One-step doubly robust correction of the naive plug-in."""
    _both_arms(dataset)
    c = dataset.covariates[:, fit.columns]
    tau = _original_scale(dataset, fit.tau_at(c))
    pi = fit.pi_at(c)
    o = _original_scale(dataset, dataset.outcome)
    theta_n = float(np.mean(dataset.exposure * tau))
    theta = theta_n + float(np.mean(o * pi - tau * pi))
    diagnostics = {"theta_naive": theta_n, "warnings": list(fit.warnings)}
    cov_id = fit.columns[0] if len(fit.columns) == 1 else fit.columns
    return _finalize_efficient(dataset, "dr", cov_id, theta, pi, tau, diagnostics)


NEWTON_TOL = 1e-10
NEWTON_MAX_STEPS = 50


def _offset_logistic_mle(h: np.ndarray, y: np.ndarray, base: np.ndarray) -> float:
    """One-dimensional MLE of eps for expit(base + eps * h) against y.

    Newton with step-halving on the mean score; bisection fallback when a
    sign change brackets the root.  ``y`` may be fractional in [0, 1].
    """
    n = y.shape[0]

    def mean_score(eps: float) -> float:
        return float(np.mean(h * (y - expit(base + eps * h))))

    s0 = mean_score(0.0)
    if abs(s0) < NEWTON_TOL:
        return 0.0
    eps = 0.0
    s = s0
    for _ in range(NEWTON_MAX_STEPS):
        mu = expit(base + eps * h)
        info = float(np.mean(h * h * mu * (1.0 - mu)))
        if info <= 0.0:
            break
        step = s / info
        scale = 1.0
        for _ in range(30):
            cand = eps + scale * step
            s_cand = mean_score(cand)
            if abs(s_cand) <= abs(s):
                break
            scale *= 0.5
        eps, s = cand, s_cand
        if abs(s) < NEWTON_TOL:
            return eps
    # Bisection fallback: expand a bracket around 0 on the score sign change.
    lo, hi = -1.0, 1.0
    for _ in range(60):
        if mean_score(lo) * s0 <= 0.0 or mean_score(hi) * s0 <= 0.0:
            break
        lo *= 2.0
        hi *= 2.0
    a, b = (lo, 0.0) if mean_score(lo) * s0 <= 0.0 else (0.0, hi)
    sa = mean_score(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        sm = mean_score(mid)
        if abs(sm) < NEWTON_TOL:
            return mid
        if sa * sm <= 0.0:
            b = mid
        else:
            a, sa = mid, sm
    return 0.5 * (a + b)


def fluctuate_pi(state: TmleState, dataset: Dataset) -> tuple[TmleState, float]:
    """Propensity update along the least-favorable logistic path.

    The path covariate is H1 = -2 pi (Q1 - Q0) - Q0 and eps1 maximizes the
    Bernoulli log-likelihood of the exposure.  When the score at eps = 0
    already vanishes (e.g. saturated fits) the state is left untouched.
    """
    h1 = -2.0 * state.pi_values * (state.q1_values - state.q0_values) - state.q0_values
    e = dataset.exposure.astype(float)
    if np.max(np.abs(h1)) == 0.0:
        state.eps1 = 0.0
        return state, 0.0
    score0 = float(np.mean(h1 * (e - state.pi_values)))
    if abs(score0) < NEWTON_TOL:
        state.eps1 = 0.0
        return state, 0.0
    pi = np.clip(state.pi_values, PROB_CLIP, 1.0 - PROB_CLIP)
    base = logit(pi)
    eps1 = _offset_logistic_mle(h1, e, base)
    state.pi_values = np.clip(expit(base + eps1 * h1), PROB_CLIP, 1.0 - PROB_CLIP)
    state.eps1 = eps1
    return state, eps1


def fluctuate_q(state: TmleState, dataset: Dataset, outcome_kind: str = "continuous") -> tuple[TmleState, float]:
    """Exposure-response update along its least-favorable path.

    Continuous outcome: linear path Q + eps * H2 with H2 = -pi (updated this
    iteration); eps2 has the closed-form least-squares solution.  Bounded
    outcome: logistic path on logit(Q) with the Bernoulli loss.
    """
    h2 = -state.pi_values
    e = dataset.exposure
    q_obs = np.where(e == 1, state.q1_values, state.q0_values)
    o = dataset.outcome
    if outcome_kind == "bounded":
        resid_score = float(np.mean(h2 * (o - q_obs)))
        if abs(resid_score) < NEWTON_TOL:
            state.eps2 = 0.0
            return state, 0.0
        q_obs_c = np.clip(q_obs, PROB_CLIP, 1.0 - PROB_CLIP)
        eps2 = _offset_logistic_mle(h2, o, logit(q_obs_c))
        for attr in ("q0_values", "q1_values"):
            q = np.clip(getattr(state, attr), PROB_CLIP, 1.0 - PROB_CLIP)
            setattr(
                state,
                attr,
                np.clip(expit(logit(q) + eps2 * h2), PROB_CLIP, 1.0 - PROB_CLIP),
            )
        state.eps2 = eps2
        return state, eps2
    denom = float(np.sum(h2 * h2))
    if denom < 1e-14:
        state.eps2 = 0.0
        return state, 0.0
    eps2 = float(np.sum(h2 * (o - q_obs)) / denom)
    state.q0_values = state.q0_values + eps2 * h2
    state.q1_values = state.q1_values + eps2 * h2
    state.eps2 = eps2
    return state, eps2


def tmle_theta(
    dataset: Dataset,
    fit,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> ScoreEstimate:
    """Targeted maximum likelihood estimate of theta and the derived scores.

    Alternates the propensity and exposure-response fluctuations until both
    coefficients fall below ``tol``, then evaluates the substitution
    estimator theta = mean(pi_hat * tau_hat) over the empirical covariate
    distribution; at convergence the empirical mean of the efficient
    influence curve vanishes.
    """
    _both_arms(dataset)
    c = dataset.covariates[:, fit.columns]
    state = TmleState(
        pi_values=fit.pi_at(c),
        q0_values=fit.q_at(0, c),
        q1_values=fit.q_at(1, c),
    )
    converged = False
    for k in range(max_iter):
        state.iteration = k
        _, eps1 = fluctuate_pi(state, dataset)
        _, eps2 = fluctuate_q(state, dataset, dataset.outcome_kind)
        state.trace.append((eps1, eps2))
        if max(abs(eps1), abs(eps2)) < tol:
            converged = True
            break
    tau = state.pi_values * state.q1_values + (1.0 - state.pi_values) * state.q0_values
    tau = _original_scale(dataset, tau)
    # Substitution estimator over the empirical covariate distribution: the
    # fitted exposure law is pi_hat, so E_fit{I(E=1) tau(C)} = mean(pi * tau).
    # This is the form that zeroes the empirical influence-curve equation;
    # the observed-arm average mean(E * tau) differs by O_p(n^{-1/2}) and is
    # reported in the diagnostics.
    theta = float(np.mean(state.pi_values * tau))
    diagnostics = {
        "iterations": state.iteration + 1,
        "final_eps1": abs(state.eps1),
        "final_eps2": abs(state.eps2),
        "trace": list(state.trace),
        "theta_observed_arm": float(np.mean(dataset.exposure * tau)),
        "warnings": list(fit.warnings),
    }
    if not converged:
        diagnostics["warnings"].append(
            f"tmle did not converge in {max_iter} iterations "
            f"(|eps1|={abs(state.eps1):.3e}, |eps2|={abs(state.eps2):.3e})"
        )
    cov_id = fit.columns[0] if len(fit.columns) == 1 else fit.columns
    return _finalize_efficient(dataset, "tmle", cov_id, theta, state.pi_values, tau, diagnostics)


def _constant_estimate(dataset: Dataset, cov_id, kind: str) -> ScoreEstimate:
    """Degenerate estimate for a constant covariate: phi = 0, psi = 1."""
    o = _original_scale(dataset, dataset.outcome)
    mu_o = float(o.mean())
    mu_e = float(dataset.exposure.mean())
    n = dataset.n
    est = ScoreEstimate(
        covariate_id=cov_id,
        estimator_kind=kind,
        theta_hat=mu_o * mu_e,
        mu_o_hat=mu_o,
        mu_e_hat=mu_e,
        phi_hat=0.0,
        psi_hat=1.0,
        diagnostics={"constant": True, "warnings": ["constant covariate: scores fixed at null"]},
    )
    if kind in ("dr", "tmle"):
        zero = np.zeros(n)
        est.influence_values = {
            "d_theta": zero,
            "d_mu_o": zero,
            "d_mu_e": zero,
            "d_phi": zero,
            "d_psi": zero,
        }
    return est


def score_covariate(
    dataset: Dataset,
    columns,
    estimator_kind: str,
    basis: BasisConfig,
    saturated: bool = False,
) -> ScoreEstimate:
    """Estimate the confounding scores of one covariate or covariate group."""
    if estimator_kind not in ESTIMATOR_KINDS:
        raise ValidationError(f"unknown estimator kind {estimator_kind!r}")
    if isinstance(columns, (int, np.integer)):
        cols = (int(columns),)
    else:
        cols = tuple(int(j) for j in columns)
    cov_id = cols[0] if len(cols) == 1 else cols
    col_sd = dataset.covariates[:, cols].std(axis=0, ddof=1)
    if np.all(col_sd == 0.0):
        return _constant_estimate(dataset, cov_id, estimator_kind)

    if saturated:
        if len(cols) != 1:
            raise ValidationError("saturated fits support single covariates only")
        fit = fit_saturated(dataset, cols[0])
    elif estimator_kind == "plugin_om":
        fit = fit_tau(dataset, cols, basis)
    elif estimator_kind == "plugin_ps":
        fit = fit_nuisances(dataset, cols, basis, parts=("pi",))
    elif estimator_kind == "dr":
        fit = fit_nuisances(dataset, cols, basis, parts=("tau", "pi"))
    else:
        fit = fit_nuisances(dataset, cols, basis, parts=("pi", "q"))

    if estimator_kind == "plugin_om":
        return plugin_scores_om(dataset, fit)
    if estimator_kind == "plugin_ps":
        return plugin_scores_ps(dataset, fit)
    if estimator_kind == "dr":
        return theta_dr(dataset, fit)
    return tmle_theta(dataset, fit)


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def score_all(
    dataset: Dataset,
    estimator_kind: str = "tmle",
    basis: BasisConfig | None = None,
    threads: int | None = None,
    saturated: bool = False,
) -> list[ScoreEstimate]:
    """Score every covariate; results are returned in column order.

    Per-covariate estimation is independent and runs on a thread pool; the
    gather order is fixed by column index, so output is thread-count
    invariant.
    """
    basis = basis or BasisConfig()
    threads = _resolve_threads(threads)
    jobs = list(range(dataset.p))
    if threads == 1:
        return [score_covariate(dataset, j, estimator_kind, basis, saturated) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(
            pool.map(lambda j: score_covariate(dataset, j, estimator_kind, basis, saturated), jobs)
        )


def score_groups(
    dataset: Dataset,
    group_indices: list[tuple[str, tuple[int, ...]]],
    estimator_kind: str = "tmle",
    basis: BasisConfig | None = None,
    threads: int | None = None,
) -> list[ScoreEstimate]:
    """Score covariate groups with additive group bases; output order follows the input groups."""
    basis = basis or BasisConfig()
    threads = _resolve_threads(threads)

    def run(item):
        name, cols = item
        est = score_covariate(dataset, cols, estimator_kind, basis)
        est.covariate_id = name
        return est

    if threads == 1:
        return [run(item) for item in group_indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, group_indices))
