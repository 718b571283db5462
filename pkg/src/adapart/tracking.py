"""Rao-Blackwellized particle filtering for fixed-cardinality multi-target tracking.

``K`` targets move independently under linear Gaussian dynamics and every
time step delivers exactly ``K`` measurements in unknown order. Each particle
samples only the measurement-to-target association; target states are
tracked in closed form by one Kalman filter per target.

Given a particle's predictive statistics, the likelihood of association
``perm`` (``perm[k]`` = measurement assigned to target ``k``) is
``prod_k A[perm[k], k]`` with ``A[j, k] = N(y_j; H m_k, H P_k H' + R)``.
The optimal proposal is therefore the permutation distribution of ``A`` and
its normaliser is ``per(A)``; it is sampled exactly with
:class:`~adapart.sampler.PermutationSampler`. The sequential proposal assigns
targets one at a time among the measurements still free.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import DeadParticleSet, SingularInnovationCovariance, ZeroPermanent
from .estimator import estimate_fixed_bound
from .sampler import PermutationSampler

__all__ = [
    "LinearGaussianModel",
    "ParticleState",
    "Proposal",
    "ScenarioData",
    "association_log_likelihoods",
    "association_matrix",
    "evaluate",
    "initial_particles",
    "kalman_predict",
    "kalman_update",
    "rbpf_step",
    "run_filter",
    "simulate",
    "spring_model",
]


@dataclass(frozen=True)
class LinearGaussianModel:
    """Per-target linear Gaussian dynamics with a shared measurement model.

    ``F`` has shape ``(K, d, d)``: one transition matrix per target.
    ``prior_mean`` has shape ``(K, d)`` and ``prior_cov`` ``(d, d)``.
    """

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    prior_mean: np.ndarray
    prior_cov: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.ndim == 2:
            F = F[None]
        prior_mean = np.atleast_2d(np.asarray(self.prior_mean, dtype=float))
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "prior_mean", prior_mean)
        for name in ("Q", "H", "R", "prior_cov"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if F.shape[0] != prior_mean.shape[0]:
            raise ValueError("F and prior_mean disagree on the number of targets")
        for name in ("Q", "R", "prior_cov"):
            mat = getattr(self, name)
            if not np.allclose(mat, mat.T):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(mat).min() < -1e-9:
                raise ValueError(f"{name} must be positive semi-definite")

    @property
    def K(self) -> int:
        return self.F.shape[0]

    @property
    def state_dim(self) -> int:
        return self.F.shape[1]

    @property
    def obs_dim(self) -> int:
        return self.H.shape[0]


def spring_model(
    K: int,
    dt: float = 1.0,
    damping: float = 0.1,
    q: float = 0.01,
    r: float = 0.1,
    anchor_radius: float = 3.0,
) -> LinearGaussianModel:
    """2-d damped springs pulling every target toward the origin.

    State is ``(px, py, vx, vy)``. Target ``k`` (0-based) has angular
    frequency ``0.2 + 0.05 * (k + 1)``; its transition is the exact matrix
    exponential of the continuous oscillator over ``dt``. Priors are
    standard normal around anchors spread evenly on a circle.
    """
    eye = np.eye(2)
    F = []
    for k in range(K):
        omega = 0.2 + 0.05 * (k + 1)
        cont = np.block([[np.zeros((2, 2)), eye], [-(omega**2) * eye, -damping * eye]])
        F.append(linalg.expm(cont * dt))
    angles = 2 * np.pi * np.arange(K) / K
    anchors = np.zeros((K, 4))
    anchors[:, 0] = anchor_radius * np.cos(angles)
    anchors[:, 1] = anchor_radius * np.sin(angles)
    H = np.hstack([eye, np.zeros((2, 2))])
    return LinearGaussianModel(np.array(F), q * np.eye(4), H, r * np.eye(2), anchors, np.eye(4))


# ---------------------------------------------------------------------------
# Kalman filter


def _symmetrize(P):
    return 0.5 * (P + P.T)


def kalman_predict(post_mean, post_cov, model: LinearGaussianModel, target: int = 0):
    F = model.F[target]
    return F @ post_mean, _symmetrize(F @ post_cov @ F.T + model.Q)


def kalman_update(pred_mean, pred_cov, measurement, model: LinearGaussianModel):
    """Condition on one measurement.

    Returns ``(post_mean, post_cov, log_likelihood)``, the last being the log
    density of ``measurement`` under ``N(H m, H P H' + R)``.
    """
    H, R = model.H, model.R
    y = np.asarray(measurement, dtype=float)
    S = _symmetrize(H @ pred_cov @ H.T + R)
    try:
        cho = linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError:
        raise SingularInnovationCovariance("innovation covariance is not positive definite") from None
    resid = y - H @ pred_mean
    gain = linalg.cho_solve(cho, H @ pred_cov).T
    post_mean = pred_mean + gain @ resid
    I_KH = np.eye(len(pred_mean)) - gain @ H
    # Joseph form keeps the covariance symmetric positive semi-definite
    post_cov = _symmetrize(I_KH @ pred_cov @ I_KH.T + gain @ R @ gain.T)
    maha = resid @ linalg.cho_solve(cho, resid)
    logdet = 2 * np.sum(np.log(np.diag(cho[0])))
    loglik = -0.5 * (maha + logdet + len(y) * math.log(2 * math.pi))
    return post_mean, post_cov, float(loglik)


def _predictive_loglik(mean, cov, ys, model):
    H = model.H
    S = _symmetrize(H @ cov @ H.T + model.R)
    try:
        cho = linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError:
        raise SingularInnovationCovariance("innovation covariance is not positive definite") from None
    resid = ys - H @ mean  # (K, obs)
    maha = np.einsum("ij,ji->i", resid, linalg.cho_solve(cho, resid.T))
    logdet = 2 * np.sum(np.log(np.diag(cho[0])))
    return -0.5 * (maha + logdet + ys.shape[1] * math.log(2 * math.pi))


# ---------------------------------------------------------------------------
# Particles and scenarios


@dataclass(frozen=True)
class ParticleState:
    """One association hypothesis with its Kalman sufficient statistics.

    ``means``/``covs`` are the per-target predictive statistics for the next
    step. ``filtered_means`` holds the posterior means of every past step
    and ``assoc_loglik`` the summed log-likelihood of the sampled
    associations. Histories are tuples so resampled duplicates share them.
    """

    log_weight: float
    means: np.ndarray
    covs: np.ndarray
    associations: tuple = ()
    filtered_means: tuple = ()
    assoc_loglik: float = 0.0


@dataclass
class ScenarioData:
    """Ground truth and shuffled measurements.

    ``states`` has shape ``(T, K, d)`` and ``measurements`` ``(T, K, obs)``.
    ``associations[t, k]`` is the measurement index produced by target ``k``.
    """

    states: np.ndarray
    measurements: np.ndarray
    associations: np.ndarray

    @property
    def K(self) -> int:
        return self.states.shape[1]

    @property
    def T(self) -> int:
        return self.states.shape[0]


def _gaussian(rng, cov, size):
    # eigen square root tolerates singular (e.g. zero) covariances
    w, v = np.linalg.eigh(cov)
    root = v * np.sqrt(np.clip(w, 0, None))
    return rng.standard_normal((size, cov.shape[0])) @ root.T


def simulate(model: LinearGaussianModel, K: int, T: int, seed: int) -> ScenarioData:
    """Simulate ``T`` steps of the first ``K`` targets of ``model``."""
    if K > model.K:
        raise ValueError(f"model describes {model.K} targets, asked for {K}")
    rng = np.random.default_rng(seed)
    d = model.state_dim
    states = np.empty((T, K, d))
    meas = np.empty((T, K, model.obs_dim))
    assoc = np.empty((T, K), dtype=int)
    x = model.prior_mean[:K] + _gaussian(rng, model.prior_cov, K)
    for t in range(T):
        if t:
            x = np.einsum("kij,kj->ki", model.F[:K], x) + _gaussian(rng, model.Q, K)
        states[t] = x
        y = x @ model.H.T + _gaussian(rng, model.R, K)
        perm = rng.permutation(K)
        meas[t, perm] = y
        assoc[t] = perm
    return ScenarioData(states, meas, assoc)


def initial_particles(model: LinearGaussianModel, N: int, K: int | None = None) -> list[ParticleState]:
    K = model.K if K is None else K
    means = model.prior_mean[:K].copy()
    covs = np.repeat(model.prior_cov[None], K, axis=0)
    return [ParticleState(-math.log(N), means, covs) for _ in range(N)]


def association_log_likelihoods(particle: ParticleState, measurements, model) -> np.ndarray:
    """``L[j, k]``: log density of measurement ``j`` under target ``k``'s predictive."""
    ys = np.asarray(measurements, dtype=float)
    K = len(particle.means)
    L = np.empty((len(ys), K))
    for k in range(K):
        L[:, k] = _predictive_loglik(particle.means[k], particle.covs[k], ys, model)
    return L


def _normalized(L: np.ndarray, iters: int = 50, tol: float = 1e-9) -> tuple[np.ndarray, float]:
    """Sinkhorn-balance ``exp(L)`` in log space.

    Rescaling rows and columns multiplies every permutation weight by the
    same factor, so the permutation distribution is unchanged and
    ``log per(exp(L)) = log per(A) + offset``. A near doubly-stochastic
    matrix keeps the bound close to the permanent; raw likelihoods span
    hundreds of orders of magnitude and would make rejection hopeless.
    """
    L = L.copy()
    offset = 0.0
    for _ in range(iters):
        row = logsumexp(L, axis=1, keepdims=True)
        row[~np.isfinite(row)] = 0.0
        L -= row
        col = logsumexp(L, axis=0, keepdims=True)
        col[~np.isfinite(col)] = 0.0
        L -= col
        offset += float(row.sum() + col.sum())
        if np.max(np.abs(row)) < tol and np.max(np.abs(col)) < tol:
            break
    return np.exp(L), offset


def association_matrix(particle: ParticleState, measurements, model) -> np.ndarray:
    """Association likelihoods, Sinkhorn-rescaled to be close to doubly stochastic."""
    return _normalized(association_log_likelihoods(particle, measurements, model))[0]


class Proposal(str, enum.Enum):
    OPTIMAL = "optimal"
    SEQUENTIAL = "sequential"


def _log_permanent_estimate(sampler, trials, rng, max_rounds=100):
    # widen the trial budget until something is accepted; a = 0 has no estimate
    total = 0
    accepted = 0
    for _ in range(max_rounds):
        rep = estimate_fixed_bound(sampler.matrix, trials, rng=rng, sampler=sampler)
        total += rep.trials
        accepted += rep.accepted
        if accepted:
            return math.log(accepted / total) + sampler.root_log_ub
    raise ZeroPermanent("no trial accepted while estimating the association permanent")


def _sequential(L, rng):
    K = L.shape[1]
    free = list(range(L.shape[0]))
    perm = [0] * K
    log_q = 0.0
    for k in range(K):
        logits = L[free, k]
        top = logits.max()
        if top == -math.inf:
            raise ZeroPermanent("no free measurement is compatible with the target")
        p = np.exp(logits - top)
        p /= p.sum()
        if len(free) == 1:
            i = 0
        else:
            i = min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), len(free) - 1)
        perm[k] = free.pop(i)
        log_q += math.log(p[i])
    return tuple(perm), log_q


def rbpf_step(
    particles: list[ParticleState],
    measurements,
    model: LinearGaussianModel,
    proposal: Proposal | str = Proposal.OPTIMAL,
    per_estimate_trials: int = 10,
    rng=None,
    resample_threshold: float = 0.5,
) -> list[ParticleState]:
    """Advance every particle by one time step and resample if needed.

    With the optimal proposal the association is drawn exactly from the
    permutation distribution of the association matrix, and the weight is
    multiplied by an estimate of its permanent built from
    ``per_estimate_trials`` accept/reject trials. With the sequential
    proposal the weight is multiplied by likelihood over proposal
    probability. Weights are then normalised and the set is resampled
    multinomially when the effective sample size drops below
    ``resample_threshold * N``.
    """
    if not particles:
        raise ValueError("particle set is empty")
    proposal = Proposal(proposal)
    rng = np.random.default_rng(rng)
    ys = np.asarray(measurements, dtype=float)
    K = len(particles[0].means)
    out = []
    for p in particles:
        L = association_log_likelihoods(p, ys, model)
        if proposal is Proposal.OPTIMAL:
            A, offset = _normalized(L)
            sampler = PermutationSampler(A)
            perm = sampler.draw(rng).permutation
            log_inc = _log_permanent_estimate(sampler, per_estimate_trials, rng) + offset
        else:
            perm, log_q = _sequential(L, rng)
            log_inc = sum(L[perm[k], k] for k in range(K)) - log_q
        step_ll = float(sum(L[perm[k], k] for k in range(K)))
        means = np.empty_like(p.means)
        covs = np.empty_like(p.covs)
        filtered = np.empty_like(p.means)
        for k in range(K):
            m_post, P_post, _ = kalman_update(p.means[k], p.covs[k], ys[perm[k]], model)
            filtered[k] = m_post
            means[k], covs[k] = kalman_predict(m_post, P_post, model, k)
        out.append(
            ParticleState(
                p.log_weight + log_inc,
                means,
                covs,
                p.associations + (perm,),
                p.filtered_means + (filtered,),
                p.assoc_loglik + step_ll,
            )
        )

    logw = np.array([p.log_weight for p in out])
    top = logw.max()
    if not np.isfinite(top):
        raise DeadParticleSet("every particle has zero weight")
    logw = logw - (top + math.log(np.exp(logw - top).sum()))
    w = np.exp(logw)
    N = len(out)
    ess = 1.0 / np.sum(w**2)
    if ess < resample_threshold * N:
        idx = rng.choice(N, size=N, p=w / w.sum())
        return [_with_weight(out[i], -math.log(N)) for i in idx]
    return [_with_weight(p, float(lw)) for p, lw in zip(out, logw)]


def _with_weight(p: ParticleState, log_weight: float) -> ParticleState:
    return ParticleState(log_weight, p.means, p.covs, p.associations, p.filtered_means, p.assoc_loglik)


def evaluate(scenario: ScenarioData, particles: list[ParticleState], model: LinearGaussianModel | None = None) -> dict:
    """Best association log-likelihood among particles and that particle's MSE.

    The MSE is the squared Euclidean error of the filtered positions
    ``H @ mean`` against the true positions, averaged over all steps so far
    and all targets.
    """
    best = max(particles, key=lambda p: p.assoc_loglik)
    steps = len(best.filtered_means)
    H = model.H if model is not None else np.eye(scenario.measurements.shape[2], scenario.states.shape[2])
    est = np.array(best.filtered_means) @ H.T  # (t, K, obs)
    truth = scenario.states[:steps] @ H.T
    mse = float(np.mean(np.sum((est - truth) ** 2, axis=-1))) if steps else 0.0
    return {"max_log_likelihood": float(best.assoc_loglik), "mse": mse}


def run_filter(
    scenario: ScenarioData,
    model: LinearGaussianModel,
    N: int,
    proposal: Proposal | str = Proposal.OPTIMAL,
    per_estimate_trials: int = 10,
    rng=None,
    callback=None,
) -> list[ParticleState]:
    """Filter a whole scenario; ``callback(t, particles)`` runs after every step."""
    rng = np.random.default_rng(rng)
    particles = initial_particles(model, N, scenario.K)
    for t in range(scenario.T):
        particles = rbpf_step(particles, scenario.measurements[t], model, proposal, per_estimate_trials, rng)
        if callback is not None:
            callback(t, particles)
    return particles
