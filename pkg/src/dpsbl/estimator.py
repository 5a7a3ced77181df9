"""Dirichlet-process SBL channel estimator via combined BP/MF/GAMP message passing.

The per-iteration schedule is: q-message, tap belief, tap-precision belief,
assignment probabilities, stick-breaking statistics, concentration update,
stick/assignment/tap refresh, residual message, observation combine, noise
precision, and the GAMP prediction message. Baselines reuse the same loop
with the assignment probabilities frozen.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import VAR_FLOOR, combine_means_vars, digamma
from .simulate import Observation, SystemConfig

LAMBDA_CLAMP = 1e12
GAMMA_PRUNE = 1e8
PRUNE_RATIO = 30.0
# clustering controls: burn-in sweeps before assignments move, quiet sweeps
# before the partition is considered settled, sweeps reserved for the
# post-discovery re-estimation, minimum pool size for merge moves, and the
# least-squares refit acceptance gates
DP_BURNIN_SWEEPS = 6
DP_STABLE_SWEEPS = 4
DP_RESTART_RESERVE = 24
MERGE_MIN_POOL = 3
MERGE_MAX_PER_SWEEP = 100
REATTACH_RATIO = 1.2
REATTACH_NOISE_FACTOR = 2.0


class EstimatorDivergenceError(RuntimeError):
    """Raised when the message-passing state turns non-finite."""


@dataclass
class EstimatorState:
    # tap beliefs and messages, (M, L)
    alpha_hat: np.ndarray
    alpha_var: np.ndarray
    q_hat: np.ndarray
    q_var: np.ndarray
    # frequency-domain messages and beliefs, (M, N)
    p_hat: np.ndarray
    p_var: np.ndarray
    s_hat: np.ndarray
    theta_hat: np.ndarray
    theta_var: np.ndarray
    h_hat: np.ndarray
    h_var: np.ndarray
    # tap-precision beliefs, shapes (K,) and (K, L)
    gamma_shape: np.ndarray
    gamma_rate: np.ndarray
    gamma_mean: np.ndarray
    gamma_log: np.ndarray
    gamma_prior: np.ndarray  # pruned copy of gamma_mean used as the tap prior
    # assignment probabilities (M, K) and stick-breaking statistics (K,)
    phi: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    log_pi: np.ndarray
    log_1mpi: np.ndarray
    eta_hat: float
    lambda_hat: float
    # cached dictionary magnitudes
    dict_sq: np.ndarray = field(repr=False, default=None)

    @property
    def n_components(self) -> int:
        return self.phi.shape[1]


@dataclass
class EstimateReport:
    alpha_hat: np.ndarray
    h_hat: np.ndarray
    lambda_hat: float
    phi: np.ndarray
    hard_clusters: np.ndarray
    iterations_run: int
    trajectory: np.ndarray | None = None  # (T, M, L) tap means per iteration


def initialize(config: SystemConfig, observation: Observation, *, phi=None) -> EstimatorState:
    """Flat-start state; ``phi`` overrides the uniform assignment (frozen runs)."""
    config.validate()
    m_tot = observation.received.shape[0]
    n = observation.received.shape[1]
    length = observation.dictionary.shape[1]
    k = config.k_trunc if phi is None else phi.shape[1]
    hp = config.hyper

    if phi is None:
        # one antenna per component: clusters specialize immediately and the
        # merge moves consolidate them; a uniform start is a fixed point of
        # the symmetric dynamics and never separates
        phi = np.zeros((m_tot, k))
        phi[np.arange(m_tot), np.arange(m_tot) % k] = 1.0
    else:
        phi = np.asarray(phi, dtype=float)
        if phi.shape[0] != m_tot:
            raise ValueError("phi must have one row per antenna")

    lambda_hat = 1.0
    theta_hat = observation.received / observation.pilots[None, :]
    theta_var = np.full((m_tot, n), 1.0 / lambda_hat) / np.abs(observation.pilots[None, :]) ** 2
    # residual message consistent with theta and the flat prediction
    # (p_hat = 0, p_var = 1), so the first prediction has sensible phases
    s_hat = theta_hat / (theta_var + 1.0)

    gamma_shape = np.full(k, hp.c)
    gamma_rate = np.full((k, length), hp.d)
    return EstimatorState(
        alpha_hat=np.zeros((m_tot, length), dtype=complex),
        alpha_var=np.ones((m_tot, length)),
        q_hat=np.zeros((m_tot, length), dtype=complex),
        q_var=np.ones((m_tot, length)),
        p_hat=np.zeros((m_tot, n), dtype=complex),
        p_var=np.ones((m_tot, n)),
        s_hat=s_hat,
        theta_hat=theta_hat,
        theta_var=theta_var,
        h_hat=np.zeros((m_tot, n), dtype=complex),
        h_var=np.ones((m_tot, n)),
        gamma_shape=gamma_shape,
        gamma_rate=gamma_rate,
        gamma_mean=gamma_shape[:, None] / gamma_rate,
        gamma_log=digamma(gamma_shape)[:, None] - np.log(gamma_rate),
        gamma_prior=gamma_shape[:, None] / gamma_rate,
        phi=phi,
        tau1=np.ones(k),
        tau2=np.ones(k),
        log_pi=np.full(k, 1.0 / k),
        log_1mpi=np.full(k, 1.0 / k),
        eta_hat=1.0,
        lambda_hat=lambda_hat,
        dict_sq=np.abs(observation.dictionary) ** 2,
    )


def update_q(state: EstimatorState, observation: Observation) -> None:
    """Product of the dictionary-constraint messages into each tap."""
    denom = np.maximum(state.theta_var + state.p_var, VAR_FLOOR)
    state.q_var = 1.0 / np.maximum((1.0 / denom) @ state.dict_sq, VAR_FLOOR)
    state.q_hat = state.q_var * (state.s_hat @ observation.dictionary.conj()) + state.alpha_hat


def update_alpha(state: EstimatorState, damping: float = 1.0) -> None:
    """Tap belief: precision-sum of the mixture prior and the q-message."""
    prior_prec = state.phi @ state.gamma_prior
    q_var = np.maximum(state.q_var, VAR_FLOOR)
    state.alpha_var = np.maximum(1.0 / (prior_prec + 1.0 / q_var), VAR_FLOOR)
    new_mean = state.alpha_var * state.q_hat / q_var
    if damping < 1.0:
        new_mean = damping * new_mean + (1.0 - damping) * state.alpha_hat
    state.alpha_hat = new_mean


def update_gamma(state: EstimatorState, hyper) -> None:
    """Tap-precision beliefs from assignment-weighted second moments."""
    t = np.abs(state.alpha_hat) ** 2 + state.alpha_var
    counts = state.phi.sum(axis=0)
    state.gamma_shape = counts + hyper.c
    state.gamma_rate = state.phi.T @ t + hyper.d
    state.gamma_mean = state.gamma_shape[:, None] / state.gamma_rate
    state.gamma_log = digamma(state.gamma_shape)[:, None] - np.log(state.gamma_rate)
    state.gamma_prior = state.gamma_mean


def prune_gamma(state: EstimatorState, ratio: float = PRUNE_RATIO) -> None:
    """Snap clearly inactive tap precisions to a large fixed value in the
    prior handed to the tap-belief update.

    Without this the precision of an off-support tap stalls at a finite
    value set by the local message variances instead of diverging; the
    leftover variance then inflates the prediction variance, the noise
    precision loses its finite fixed point, and the fit slowly degrades.
    Taps whose precision exceeds ``ratio`` times their cluster's smallest
    precision are treated as converged-off. Only ``gamma_prior`` is
    modified; the assignment update keeps the raw precision statistics.
    """
    row_min = state.gamma_mean.min(axis=1, keepdims=True)
    mask = state.gamma_mean > ratio * row_min
    state.gamma_prior = np.where(mask, GAMMA_PRUNE, state.gamma_mean)


def update_phi(state: EstimatorState) -> None:
    """Assignment probabilities: softmax of stick-breaking plus fit scores."""
    k = state.n_components
    cum = np.concatenate(([0.0], np.cumsum(state.log_1mpi)[: k - 1]))
    t = np.abs(state.alpha_hat) ** 2 + state.alpha_var
    energy = (state.log_pi + cum)[None, :] + state.gamma_log.sum(axis=1)[None, :] - t @ state.gamma_mean.T
    shift = np.max(energy, axis=1, keepdims=True)
    bad = ~np.isfinite(shift[:, 0])
    if bad.any():
        warnings.warn("assignment energies non-finite for some antennas; using uniform rows")
        energy[bad] = 0.0
        shift[bad] = 0.0
    ex = np.exp(energy - shift)
    state.phi = ex / ex.sum(axis=1, keepdims=True)


def update_pi(state: EstimatorState) -> None:
    """Stick-breaking Beta statistics and their log expectations."""
    counts = state.phi.sum(axis=0)
    tail = np.concatenate((np.cumsum(counts[::-1])[::-1][1:], [0.0]))
    state.tau1 = counts + 1.0
    state.tau2 = tail + state.eta_hat
    total = digamma(state.tau1 + state.tau2)
    state.log_pi = digamma(state.tau1) - total
    state.log_1mpi = digamma(state.tau2) - total


def update_eta(state: EstimatorState, hyper) -> None:
    """Posterior mean of the concentration parameter."""
    denom = hyper.h_eta - state.log_1mpi.sum()
    if denom <= 0.0:
        raise EstimatorDivergenceError("non-positive denominator in concentration update")
    state.eta_hat = (state.n_components + hyper.e - 1.0) / denom


def _warm_start(state: EstimatorState, members: np.ndarray) -> None:
    """Restart the tap beliefs and GAMP messages of ``members`` from the
    flat initial state.

    Antennas arriving in a cluster through a merge or reattachment carry tap
    estimates fitted under their old (often aliased) support; the damped
    message passing then settles in that local optimum — or drags the whole
    cluster into it through the pooled precision statistics — instead of
    relearning the support from the pooled evidence. Clearing the stale
    evidence costs a few sweeps of re-convergence but removes the bias.
    """
    state.alpha_hat[members] = 0.0
    state.alpha_var[members] = 1.0
    state.q_hat[members] = 0.0
    state.q_var[members] = 1.0
    state.p_hat[members] = 0.0
    state.p_var[members] = 1.0
    state.s_hat[members] = state.theta_hat[members] / (state.theta_var[members] + 1.0)


def _refit_members(state: EstimatorState, members: np.ndarray, support: np.ndarray,
                   observation: Observation) -> None:
    """Re-seed the tap beliefs and GAMP messages of ``members`` from a ridge
    (Gaussian-MAP) refit on ``support``.

    A plain least-squares solve on a coherent near-singular sub-dictionary
    produces huge coefficients even when its residual is small, so the fit
    is regularized at the noise level. Off-support taps get a near-zero
    second moment so the pooled precision statistics stay sparse.
    """
    dictionary = observation.dictionary
    theta = observation.received[members] / observation.pilots[None, :]
    basis = dictionary[:, support]
    gram = basis.conj().T @ basis
    noise_var = 1.0 / max(state.lambda_hat, 1.0 / LAMBDA_CLAMP)
    coef = np.linalg.solve(
        gram + len(support) * noise_var * np.eye(len(support)), basis.conj().T @ theta.T
    )
    state.alpha_hat[members] = 0.0
    state.alpha_hat[np.ix_(members, support)] = coef.T
    state.alpha_var[members] = 1e-4
    state.alpha_var[np.ix_(members, support)] = noise_var
    state.q_hat[members] = state.alpha_hat[members]
    state.q_var[members] = state.alpha_var[members]
    p_hat = state.alpha_hat[members] @ dictionary.T
    p_var = state.alpha_var[members] @ state.dict_sq.T
    state.p_hat[members] = p_hat
    state.p_var[members] = p_var
    state.s_hat[members] = (state.theta_hat[members] - p_hat) / np.maximum(
        state.theta_var[members] + p_var, VAR_FLOOR
    )


def restart_estimation(state: EstimatorState, hyper) -> None:
    """Restart all tap beliefs, tap precisions, GAMP messages and the noise
    precision while keeping the cluster assignments.

    The per-antenna discovery phase leaves tap estimates biased towards
    aliased supports, and the noise precision is already large by the time
    the clusters have formed, so re-estimating from the contaminated state
    locks onto a wrong support that still fits the data at the noise level.
    Rising slowly from a small noise precision keeps the early fits cautious
    and acts as the annealing that steers the pooled support estimate into
    the right basin — the same path a run with known clusters follows.
    """
    all_rows = np.ones(state.phi.shape[0], dtype=bool)
    state.lambda_hat = 1.0
    state.theta_var = np.full_like(state.theta_var, 1.0)
    _warm_start(state, all_rows)
    k, length = state.gamma_rate.shape
    state.gamma_shape = np.full(k, hyper.c)
    state.gamma_rate = np.full((k, length), hyper.d)
    state.gamma_mean = state.gamma_shape[:, None] / state.gamma_rate
    state.gamma_log = digamma(state.gamma_shape)[:, None] - np.log(state.gamma_rate)
    state.gamma_prior = state.gamma_mean.copy()


def merge_clusters(
    state: EstimatorState,
    observation: Observation,
    max_merges: int = MERGE_MAX_PER_SWEEP,
    noise_factor: float = REATTACH_NOISE_FACTOR,
) -> int:
    """Greedy agglomerative merge moves on the cluster responsibilities.

    Two pools merge when one pool's learned support explains the data of
    both pools' members at the noise level under a direct least-squares
    refit. Coordinate updates of the assignment probabilities cannot cross
    the barrier between two already-specialized clusters — each pool's own
    tap precisions always fit its own second moments best, and pruning can
    lock a pool onto an aliased support that moment statistics never
    disown — so merges are proposed and verified explicitly against the
    observations. Returns the number of merges performed.
    """
    counts = state.phi.sum(axis=0)
    dictionary = observation.dictionary
    n = dictionary.shape[0]
    supports = {}
    for k in np.where(counts >= MERGE_MIN_POOL)[0]:
        idx = np.where(state.gamma_prior[k] < GAMMA_PRUNE)[0]
        # a support close to the pilot count fits anything at noise level
        # and carries no evidence either way
        if 0 < len(idx) <= 3 * n // 4:
            supports[k] = idx
    if len(supports) < 2:
        return 0
    theta = observation.received / observation.pilots[None, :]
    hard = state.phi.argmax(axis=1)
    pools = sorted(supports)
    # resid[k, j]: total squared residual of pool k's members refit on pool
    # j's support; additive under merges, so one batch of solves per sweep
    resid = {}
    for j in pools:
        basis = dictionary[:, supports[j]]
        for k in pools:
            d = theta[hard == k].T
            coef = np.linalg.lstsq(basis, d, rcond=None)[0]
            resid[k, j] = float(np.sum(np.abs(d - basis @ coef) ** 2))
    lam = max(state.lambda_hat, 1.0 / LAMBDA_CLAMP)
    thr = {j: noise_factor * max(n - len(supports[j]), 1) / lam for j in pools}
    size = {k: float(counts[k]) for k in pools}
    sup_of = {k: k for k in pools}
    absorbed = {k: {k} for k in pools}
    active = set(pools)
    merged = 0
    while merged < max_merges and len(active) > 1:
        best = None
        for a in active:
            for b in active:
                if b <= a:
                    continue
                own = resid[a, sup_of[a]] + resid[b, sup_of[b]]
                for j in (sup_of[a], sup_of[b]):
                    e = resid[a, j] + resid[b, j]
                    mean_e = e / (size[a] + size[b])
                    # the shared support must explain the union at the noise
                    # level and nearly as well as the pools' own supports do
                    if (
                        mean_e <= thr[j]
                        and e <= REATTACH_RATIO * own
                        and (best is None or mean_e < best[0])
                    ):
                        best = (mean_e, a, b, j)
        if best is None:
            break
        _, a, b, j = best
        state.phi[:, a] += state.phi[:, b]
        state.phi[:, b] = 0.0
        size[a] += size[b]
        for jj in pools:
            resid[a, jj] += resid[b, jj]
        sup_of[a] = j
        absorbed[a] |= absorbed.pop(b)
        active.discard(b)
        merged += 1
    for a in active:
        if len(absorbed[a]) > 1:
            members = np.isin(hard, list(absorbed[a]))
            state.phi[members] = 0.0
            state.phi[members, a] = 1.0
            _refit_members(state, members, supports[sup_of[a]], observation)
    return merged


def reattach_stragglers(
    state: EstimatorState,
    observation: Observation,
    ratio: float = REATTACH_RATIO,
    noise_factor: float = REATTACH_NOISE_FACTOR,
) -> int:
    """Move members of tiny clusters into a large cluster whose support
    explains their data.

    With fewer pilots than taps, a lone antenna can fit its observations on
    a wrong (aliased) support and its second moments then never match any
    pooled cluster, so moment-based moves cannot recover it. A direct
    least-squares refit on each big cluster's support settles the question;
    the move is accepted when the refit residual is comparable to the one
    on the antenna's own learned support and consistent with the noise
    level. Returns the number of antennas moved.
    """
    counts = state.phi.sum(axis=0)
    pools = np.where(counts >= 4)[0]
    small = np.where((counts > 0.0) & (counts <= 2))[0]
    if len(pools) == 0 or len(small) == 0:
        return 0
    dictionary = observation.dictionary
    n = dictionary.shape[0]
    theta = observation.received / observation.pilots[None, :]
    hard = state.phi.argmax(axis=1)
    supports = {}
    for a in pools:
        idx = np.where(state.gamma_prior[a] < GAMMA_PRUNE)[0]
        if 0 < len(idx) <= 3 * n // 4:
            supports[a] = idx
    if not supports:
        return 0

    def resid(member, idx):
        d = theta[member]
        coef = np.linalg.lstsq(dictionary[:, idx], d, rcond=None)[0]
        r = d - dictionary[:, idx] @ coef
        return np.vdot(r, r).real

    moved = 0
    for b in small:
        own_idx = np.where(state.gamma_prior[b] < GAMMA_PRUNE)[0]
        if len(own_idx) == 0 or len(own_idx) >= n:
            continue
        for member in np.where(hard == b)[0]:
            own = resid(member, own_idx)
            best_a, best_e, best_s = None, np.inf, 0
            for a, idx in supports.items():
                e = resid(member, idx)
                if e < best_e:
                    best_a, best_e, best_s = a, e, len(idx)
            if best_a is None:
                continue
            noise_ok = best_e <= noise_factor * max(n - best_s, 1) / max(
                state.lambda_hat, 1.0 / LAMBDA_CLAMP
            )
            if best_e <= ratio * own and noise_ok:
                state.phi[member] = 0.0
                state.phi[member, best_a] = 1.0
                one = np.zeros(state.phi.shape[0], dtype=bool)
                one[member] = True
                _refit_members(state, one, supports[best_a], observation)
                moved += 1
    return moved


def update_s(state: EstimatorState, damping: float = 1.0) -> None:
    """GAMP residual message."""
    new = (state.theta_hat - state.p_hat) / np.maximum(state.theta_var + state.p_var, VAR_FLOOR)
    if damping < 1.0:
        new = damping * new + (1.0 - damping) * state.s_hat
    state.s_hat = new


def update_theta_and_h(state: EstimatorState, observation: Observation) -> None:
    """Observation-node message and the frequency-domain belief."""
    x = observation.pilots[None, :]
    mod2 = np.abs(x) ** 2
    if np.any(mod2 == 0.0):
        raise ValueError("pilot symbols must be nonzero")
    state.theta_hat = observation.received / x
    state.theta_var = np.broadcast_to(1.0 / (state.lambda_hat * mod2), state.p_var.shape).copy()
    state.h_hat, state.h_var = combine_means_vars(
        state.theta_hat, state.theta_var, state.p_hat, state.p_var
    )


def update_lambda(state: EstimatorState, observation: Observation) -> None:
    """Noise-precision estimate from the posterior residual energy."""
    x = observation.pilots[None, :]
    resid = np.abs(observation.received - x * state.h_hat) ** 2 + np.abs(x) ** 2 * state.h_var
    total = resid.sum()
    if total <= 0.0:
        warnings.warn("zero posterior residual; clamping noise precision")
        state.lambda_hat = LAMBDA_CLAMP
        return
    state.lambda_hat = min(resid.size / total, LAMBDA_CLAMP)


def update_p(state: EstimatorState, observation: Observation) -> None:
    """GAMP prediction message with the Onsager correction."""
    state.p_var = state.alpha_var @ state.dict_sq.T
    state.p_hat = state.alpha_hat @ observation.dictionary.T - state.s_hat * state.p_var


_CHECKED_FIELDS = (
    "q_hat", "q_var", "alpha_hat", "alpha_var", "gamma_mean", "gamma_log",
    "phi", "log_pi", "log_1mpi", "s_hat", "theta_hat", "h_hat", "h_var", "p_hat", "p_var",
)


def _check_finite(state: EstimatorState, iteration: int) -> None:
    for name in _CHECKED_FIELDS:
        if not np.all(np.isfinite(getattr(state, name))):
            raise EstimatorDivergenceError(
                f"non-finite values in {name} at iteration {iteration}"
            )
    if not np.isfinite(state.lambda_hat) or not np.isfinite(state.eta_hat):
        raise EstimatorDivergenceError(f"non-finite scalar state at iteration {iteration}")


def run(
    config: SystemConfig,
    observation: Observation,
    *,
    phi_fixed: np.ndarray | None = None,
    fixed_gamma_mean: np.ndarray | None = None,
    learn_lambda: bool = True,
    lambda_init: float | None = None,
    damping: float = 0.7,
    max_iters: int | None = None,
    sweeps: int | None = None,
    prune_ratio: float | None = PRUNE_RATIO,
    record_trajectory: bool = False,
) -> EstimateReport:
    """Run the full message-passing schedule for ``max_iters`` iterations.

    Each iteration performs ``sweeps`` full update passes; the default is 2,
    or 3 when the cluster structure is being learned, since the discovery
    phase and the post-discovery restart consume part of the sweep budget.
    With ``phi_fixed`` the assignment/stick/concentration updates are
    skipped (baseline estimators); ``fixed_gamma_mean`` additionally freezes
    the tap precisions (pure GAMP over a fixed Gaussian prior).
    ``prune_ratio=None`` disables tap-precision pruning.
    """
    if sweeps is None:
        sweeps = 3 if phi_fixed is None else 2
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    state = initialize(config, observation, phi=phi_fixed)
    if lambda_init is not None:
        state.lambda_hat = lambda_init
        state.theta_var = np.full_like(state.theta_var, 1.0) / (
            state.lambda_hat * np.abs(observation.pilots[None, :]) ** 2
        )
        state.s_hat = state.theta_hat / (state.theta_var + 1.0)
    if fixed_gamma_mean is not None:
        state.gamma_mean = np.asarray(fixed_gamma_mean, dtype=float)
        state.gamma_prior = state.gamma_mean
    learn_phi = phi_fixed is None
    learn_gamma = fixed_gamma_mean is None
    iters = config.max_iters if max_iters is None else max_iters
    trajectory = np.empty((iters,) + state.alpha_hat.shape, dtype=complex) if record_trajectory else None

    sweep_count = 0
    moves_done = False
    quiet_sweeps = 0
    for t in range(iters):
        for _ in range(sweeps):
            sweep_count += 1
            update_q(state, observation)
            update_alpha(state, damping)
            if learn_gamma:
                update_gamma(state, config.hyper)
                if prune_ratio is not None:
                    prune_gamma(state, prune_ratio)
            if learn_phi and sweep_count > DP_BURNIN_SWEEPS:
                changed = merge_clusters(state, observation)
                changed += reattach_stragglers(state, observation)
                if changed:
                    moves_done = True
                    quiet_sweeps = 0
                    if learn_gamma:
                        update_gamma(state, config.hyper)
                        if prune_ratio is not None:
                            prune_gamma(state, prune_ratio)
                else:
                    quiet_sweeps += 1
                settled = moves_done and quiet_sweeps >= DP_STABLE_SWEEPS
                out_of_time = sweep_count >= sweeps * iters - DP_RESTART_RESERVE
                if settled or out_of_time:
                    # clusters have formed and settled (or the budget for
                    # discovery is spent): freeze the discovered partition
                    # for good and re-estimate from scratch under it; late
                    # moves would inject transients into the converged fit
                    state.phi = np.where(
                        state.phi == state.phi.max(axis=1, keepdims=True), 1.0, 0.0
                    )
                    restart_estimation(state, config.hyper)
                    learn_phi = False
                    continue
                update_phi(state)
                update_pi(state)
                update_eta(state, config.hyper)
                update_pi(state)
                update_phi(state)
            update_alpha(state, damping)
            update_theta_and_h(state, observation)
            if learn_lambda:
                update_lambda(state, observation)
            update_p(state, observation)
            # the residual message is formed from the p-message just computed;
            # pairing it with a stale prediction destabilizes the GAMP loop
            update_s(state, damping)
        _check_finite(state, t + 1)
        if record_trajectory:
            trajectory[t] = state.alpha_hat

    return EstimateReport(
        alpha_hat=state.alpha_hat.copy(),
        h_hat=state.h_hat.copy(),
        lambda_hat=state.lambda_hat,
        phi=state.phi.copy(),
        hard_clusters=state.phi.argmax(axis=1),
        iterations_run=iters,
        trajectory=trajectory,
    )
