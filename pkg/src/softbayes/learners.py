"""Sequential learners over expert-probability streams.

The pure step functions implement one predict-then-update cycle each and are
the unit under test for the algorithmic contracts; the learner classes wrap
them with a rate schedule and exclusive state ownership for harness runs.

Divergence (the learner assigned probability zero to the realized symbol) is
reported through the infinite-loss sentinel in the returned outcome, with the
weights left unchanged; whether the run halts there is the harness's call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    INFINITE_LOSS,
    LossLedger,
    as_simplex,
    mixture_prob,
    project_simplex,
    uniform_weights,
)


@dataclass(slots=True)
class WeightState:
    """Current weights, the prior they started from, and the 1-based round."""

    w: np.ndarray
    prior: np.ndarray
    t: int = 1

    @staticmethod
    def uniform(n: int) -> "WeightState":
        prior = uniform_weights(n)
        return WeightState(prior.copy(), prior, 1)

    @staticmethod
    def from_prior(prior) -> "WeightState":
        p = as_simplex(prior)
        return WeightState(p.copy(), p, 1)


@dataclass(slots=True)
class StepOutcome:
    prediction: float
    loss: float
    rate_used: float | None
    new_weights: np.ndarray

    @property
    def diverged(self) -> bool:
        return math.isinf(self.loss)


def _check_round(w: np.ndarray, p) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if q.shape != w.shape:
        raise ValueError(f"dimension mismatch: weights {w.shape} vs round {q.shape}")
    return q


def _soft_bayes_weights(w, prior, q, m: float, eta_t: float, eta_next: float) -> np.ndarray:
    c2 = eta_t / m
    c1 = 1.0 - eta_t
    if w.size <= 16:
        # numpy call overhead dominates at small expert counts; the scalar
        # loop applies the identical per-element operations
        if eta_next != eta_t:
            ratio = eta_next / eta_t
            c3 = 1.0 - ratio
            return np.array([wi * (c1 + c2 * qi) * ratio + c3 * pi
                             for wi, qi, pi in zip(w.tolist(), q.tolist(), prior.tolist())])
        return np.array([wi * (c1 + c2 * qi) for wi, qi in zip(w.tolist(), q.tolist())])
    u = q * c2
    u += c1
    u *= w
    if eta_next != eta_t:
        ratio = eta_next / eta_t
        u *= ratio
        u += (1.0 - ratio) * prior
    return u


def soft_bayes_step(state: WeightState, p, eta_t: float,
                    eta_next: float | None = None) -> StepOutcome:
    """One soft-Bayes cycle: mixture prediction, then the multiplicative-
    additive update w_i <- w_i (1 - eta + eta p_i / M).

    With ``eta_next < eta_t`` the updated weights are additionally blended
    toward the prior with ratio eta_next/eta_t, which keeps a floor of
    prior_i (1 - eta_next/eta_t) under every weight.  ``eta_next = eta_t``
    makes the blend the identity; ``eta_t = 1`` is the exact Bayesian
    posterior.
    """
    if not 0.0 < eta_t <= 1.0:
        raise ValueError(f"rate {eta_t!r} outside (0, 1]")
    if eta_next is None:
        eta_next = eta_t
    if not 0.0 < eta_next <= eta_t:
        raise ValueError(f"next rate {eta_next!r} outside (0, eta_t={eta_t!r}]: "
                         "the correction requires a nonincreasing rate sequence")
    q = _check_round(state.w, p)
    m = mixture_prob(state.w, q)
    if m == 0.0:
        return StepOutcome(0.0, INFINITE_LOSS, eta_t, state.w.copy())
    u = _soft_bayes_weights(state.w, state.prior, q, m, eta_t, eta_next)
    return StepOutcome(m, -math.log(m), eta_t, u)


def bayes_step(state: WeightState, p) -> StepOutcome:
    """Exact Bayesian posterior update: soft-Bayes at rate 1."""
    out = soft_bayes_step(state, p, 1.0, 1.0)
    return StepOutcome(out.prediction, out.loss, 1.0, out.new_weights)


def eg_step(state: WeightState, p, eta: float) -> StepOutcome:
    """Exponentiated-gradient update w_i proportional to w_i exp(eta p_i / M).

    Computed in the log domain with a log-sum-exp normalization so exponent
    arguments up to ~1e300 do not overflow; if a ratio exceeds even the
    float range, the mass collapses onto the offending experts, which is the
    instability this update genuinely has.
    """
    if not eta > 0.0:
        raise ValueError("EG rate must be positive")
    q = _check_round(state.w, p)
    m = mixture_prob(state.w, q)
    if m == 0.0:
        return StepOutcome(0.0, INFINITE_LOSS, eta, state.w.copy())
    with np.errstate(divide="ignore"):
        log_w = np.log(state.w)
    new_log_w = _eg_log_update(log_w, q, m, eta)
    return StepOutcome(m, -math.log(m), eta, np.exp(new_log_w))


def _eg_log_update(log_w: np.ndarray, q: np.ndarray, m: float, eta: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        g = (eta / m) * q
    with np.errstate(invalid="ignore"):
        z = log_w + g
    z[np.isneginf(log_w)] = -np.inf  # zero weight stays zero (-inf + inf above)
    top = z.max()
    if math.isinf(top) and top > 0:
        hit = np.isposinf(z)
        return np.where(hit, -math.log(int(hit.sum())), -np.inf)
    s = np.exp(z - top)
    return z - (top + math.log(float(s.sum())))


def ogd_step(state: WeightState, p, eta: float) -> StepOutcome:
    """Projected gradient step w' = Pi(w + eta p / M).

    The projection can concentrate all mass on one expert, after which a
    round that expert gets wrong produces the infinite-loss sentinel.
    """
    if not eta > 0.0:
        raise ValueError("OGD rate must be positive")
    q = _check_round(state.w, p)
    m = mixture_prob(state.w, q)
    if m == 0.0:
        return StepOutcome(0.0, INFINITE_LOSS, eta, state.w.copy())
    return StepOutcome(m, -math.log(m), eta, project_simplex(state.w + (eta / m) * q))


@dataclass
class MLWeightState:
    """State for the per-expert-rate variant.

    ``w`` stays strictly positive but is no longer confined to the simplex
    once the per-expert rate ratios differ; ``V[i]`` accumulates the squared
    excess prediction ratio (p_i/M - 1)^2 that drives expert i's rate.
    """

    w: np.ndarray
    prior: np.ndarray
    rates: np.ndarray
    V: np.ndarray
    t: int = 1

    @staticmethod
    def uniform(n: int, rates) -> "MLWeightState":
        prior = uniform_weights(n)
        r = np.asarray(rates, dtype=float)
        if r.shape != prior.shape:
            raise ValueError("need one rate per expert")
        if np.any(r <= 0.0) or np.any(r >= 1.0):
            raise ValueError("per-expert rates must lie in (0, 1)")
        return MLWeightState(prior.copy(), prior, r.copy(), np.zeros(n), 1)


def ml_rate_next(v_prev, n: int):
    """Per-expert rate from the accumulated squared excess ratio.

    Odds form sqrt((ln N / 2) / (ln N + V)); monotone nonincreasing in V.
    Accepts a scalar or an array of V values.
    """
    if n < 2:
        raise ValueError("N must be >= 2")
    v = np.asarray(v_prev, dtype=float)
    if np.any(v < 0):
        raise ValueError("V must be nonnegative")
    ln_n = math.log(n)
    eta_bar = np.sqrt((ln_n / 2.0) / (ln_n + v))
    eta = eta_bar / (1.0 + eta_bar)
    return float(eta) if np.isscalar(v_prev) or v.ndim == 0 else eta


def ml_soft_bayes_step(state: MLWeightState, p, next_rates) -> tuple[StepOutcome, MLWeightState]:
    """One cycle of the per-expert-rate mixture.

    Prediction is the rate-weighted mixture sum(w_i eta_i p_i) / sum(w_i
    eta_i); each expert then runs the soft-Bayes update and prior blend with
    its own rate pair.  Returns the outcome and the advanced state (new
    weights, the supplied next rates, and V incremented by (p_i/M - 1)^2).
    """
    q = _check_round(state.w, p)
    nxt = np.asarray(next_rates, dtype=float)
    if nxt.shape != state.rates.shape:
        raise ValueError("need one next rate per expert")
    if np.any(nxt <= 0.0) or np.any(nxt > state.rates):
        raise ValueError("next rates must lie in (0, current rate] per expert")
    wr = state.w * state.rates
    den = float(wr.sum())
    m = float(np.dot(wr, q)) / den
    if m == 0.0:
        out = StepOutcome(0.0, INFINITE_LOSS, None, state.w.copy())
        return out, state
    ratio = q / m
    u = state.w * (1.0 - state.rates + state.rates * ratio)
    blend = nxt / state.rates
    w_new = u * blend + (1.0 - blend) * state.prior
    v_new = state.V + (ratio - 1.0) ** 2
    new_state = MLWeightState(w_new, state.prior, nxt.copy(), v_new, state.t + 1)
    return StepOutcome(m, -math.log(m), None, w_new), new_state


def meta_bayes_step(meta_weights, sub_predictions) -> tuple[float, np.ndarray]:
    """Bayesian mixture step over sub-learner predictions: the meta
    prediction is sum_k u_k M_k and the posterior is u_k proportional to
    u_k M_k.  Returns prediction 0 with weights unchanged when every
    weighted sub-prediction is zero (the divergence sentinel case)."""
    u = np.asarray(meta_weights, dtype=float)
    preds = np.asarray(sub_predictions, dtype=float)
    if u.shape != preds.shape:
        raise ValueError("dimension mismatch between meta weights and predictions")
    mp = float(np.dot(u, preds))
    if mp == 0.0:
        return 0.0, u.copy()
    return mp, u * preds / mp


def soft_bayes_sweep(batch, schedule, prior=None):
    """Plain-schedule soft-Bayes over a batch of same-shape streams at once.

    ``batch`` is a (streams, rounds, experts) array; ``schedule`` must be one
    of the plain kinds (fixed, inverse-t), since the online correction is a
    per-learner affair.  Returns ``(predictions, weights)`` with shapes
    (S, T) and (S, T, N) (post-update weights).  The per-element arithmetic
    matches ``SoftBayes.step``; this exists so seed sweeps don't pay the
    per-round interpreter cost once per stream.
    """
    if schedule.applies_correction:
        raise ValueError("batched sweeps support only plain schedules")
    P = np.asarray(batch, dtype=float)
    if P.ndim != 3:
        raise ValueError("batch must be (streams, rounds, experts)")
    S, T, N = P.shape
    w1 = uniform_weights(N) if prior is None else as_simplex(prior)
    W = np.tile(w1, (S, 1))
    preds = np.empty((S, T))
    hist = np.empty((S, T, N))
    eta = schedule.rate(1)
    for t in range(1, T + 1):
        Q = P[:, t - 1, :]
        # batched matmul hits the same dot kernel as the sequential learner,
        # keeping the two paths bitwise identical
        m = (W[:, None, :] @ Q[:, :, None]).reshape(S)
        if not np.all(m > 0.0):
            raise ValueError(f"round {t}: a sweep member diverged (mixture hit 0); "
                             "run it through run_learner for divergence handling")
        U = Q * (eta / m)[:, None]
        U += 1.0 - eta
        U *= W
        W = U
        preds[:, t - 1] = m
        hist[:, t - 1] = W
        eta = schedule.rate(t + 1)
    return preds, hist


class SoftBayes:
    """Soft-Bayes learner with a pluggable rate schedule.

    Schedules flagged ``applies_correction`` additionally blend toward the
    prior with the ratio of consecutive rates; a schedule that emits an
    increasing rate under that flag aborts the run.
    """

    def __init__(self, n: int, schedule, prior=None, name: str = "soft-bayes"):
        self.n = n
        self.name = name
        self.schedule = schedule
        self.state = WeightState.uniform(n) if prior is None else WeightState.from_prior(prior)
        self.diverged = False
        self._eta = schedule.rate(1)
        self._observe = schedule.observe if getattr(schedule, "observes", True) else None

    @property
    def weights(self) -> np.ndarray:
        return self.state.w

    @property
    def current_rate(self) -> float:
        """The rate the next step will use."""
        return self._eta

    def step(self, p) -> StepOutcome:
        eta_t = self._eta
        state = self.state
        q = p if type(p) is np.ndarray else np.asarray(p, dtype=float)
        if q.shape != state.w.shape:
            raise ValueError(f"dimension mismatch: weights {state.w.shape} vs round {q.shape}")
        m = float(np.dot(state.w, q))
        if self._observe is not None:
            self._observe(state.t, q, m)
        eta_next = self.schedule.rate(state.t + 1)
        if m == 0.0:
            self.diverged = True
            out = StepOutcome(0.0, INFINITE_LOSS, eta_t, state.w.copy())
        else:
            if self.schedule.applies_correction:
                if eta_next > eta_t:
                    raise RuntimeError(
                        f"schedule {self.schedule} emitted an increasing rate "
                        f"({eta_t!r} -> {eta_next!r}) at t={state.t}")
                w_new = _soft_bayes_weights(state.w, state.prior, q, m, eta_t, eta_next)
            else:
                w_new = _soft_bayes_weights(state.w, state.prior, q, m, eta_t, eta_t)
            out = StepOutcome(m, -math.log(m), eta_t, w_new)
        state.w = out.new_weights
        state.t += 1
        self._eta = eta_next
        return out


class Bayes(SoftBayes):
    """Exact Bayesian mixture: soft-Bayes pinned at rate 1."""

    def __init__(self, n: int, prior=None, name: str = "bayes"):
        from .rates import FixedRate

        super().__init__(n, FixedRate(1.0), prior=prior, name=name)


class ExponentiatedGradient:
    """EG over the linearized loss, with weights kept in the log domain so
    the huge p/M ratios adversarial streams produce do not overflow."""

    def __init__(self, n: int, eta: float, prior=None, name: str = "eg"):
        if not eta > 0.0:
            raise ValueError("EG rate must be positive")
        self.n = n
        self.eta = float(eta)
        self.name = name
        w1 = uniform_weights(n) if prior is None else as_simplex(prior)
        with np.errstate(divide="ignore"):
            self.log_w = np.log(w1)
        self.diverged = False

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_w)

    def step(self, p) -> StepOutcome:
        q = np.asarray(p, dtype=float)
        if q.shape != self.log_w.shape:
            raise ValueError("dimension mismatch")
        with np.errstate(divide="ignore"):
            log_q = np.log(q)
        z = self.log_w + log_q
        top = float(z.max())
        if math.isinf(top) and top < 0:
            self.diverged = True
            return StepOutcome(0.0, INFINITE_LOSS, self.eta, self.weights)
        log_m = top + math.log(float(np.exp(z - top).sum()))
        # prediction may underflow to 0.0 for display while the loss, taken
        # from log_m, stays finite
        m = math.exp(log_m)
        with np.errstate(over="ignore"):
            ratio = np.exp(log_q - log_m)
        self.log_w = _eg_log_update(self.log_w, ratio, 1.0, self.eta)
        return StepOutcome(m, -log_m, self.eta, self.weights)


class OnlineGradientDescent:
    """Projected online gradient descent on the simplex."""

    def __init__(self, n: int, eta: float, prior=None, name: str = "ogd"):
        if not eta > 0.0:
            raise ValueError("OGD rate must be positive")
        self.n = n
        self.eta = float(eta)
        self.name = name
        self.state = WeightState.uniform(n) if prior is None else WeightState.from_prior(prior)
        self.diverged = False

    @property
    def weights(self) -> np.ndarray:
        return self.state.w

    def step(self, p) -> StepOutcome:
        out = ogd_step(self.state, p, self.eta)
        if out.diverged:
            self.diverged = True
        self.state = WeightState(out.new_weights, self.state.prior, self.state.t + 1)
        return out


class MLSoftBayes:
    """Soft-Bayes with one adaptive rate per expert, each driven by that
    expert's accumulated squared excess ratio."""

    def __init__(self, n: int, prior=None, name: str = "ml-soft-bayes"):
        if n < 2:
            raise ValueError("ml-soft-bayes needs N >= 2")
        self.n = n
        self.name = name
        r0 = float(ml_rate_next(0.0, n))
        self.state = MLWeightState.uniform(n, np.full(n, r0))
        if prior is not None:
            pr = as_simplex(prior)
            self.state = MLWeightState(pr.copy(), pr, np.full(n, r0), np.zeros(n), 1)
        self.diverged = False

    @property
    def weights(self) -> np.ndarray:
        return self.state.w

    def step(self, p) -> StepOutcome:
        q = np.asarray(p, dtype=float)
        wr = self.state.w * self.state.rates
        den = float(wr.sum())
        m = float(np.dot(wr, q)) / den
        if m == 0.0:
            self.diverged = True
            out, self.state = ml_soft_bayes_step(self.state, q, self.state.rates)
            return out
        v_after = self.state.V + (q / m - 1.0) ** 2
        out, self.state = ml_soft_bayes_step(self.state, q, ml_rate_next(v_after, self.n))
        return out


class MetaBayes:
    """Bayesian mixture over fixed-rate soft-Bayes sub-learners.

    A sub-learner that diverges has its prediction pinned to zero from that
    round on; the Bayes posterior then removes its meta weight natively.
    """

    def __init__(self, n: int, rates, prior=None, name: str = "meta"):
        rates = [float(r) for r in rates]
        if not rates:
            raise ValueError("meta learner needs at least one sub-rate")
        from .rates import FixedRate

        self.n = n
        self.name = name
        self.subs = [SoftBayes(n, FixedRate(r), prior=prior) for r in rates]
        self.sub_rates = rates
        self.u = uniform_weights(len(rates))
        self.sub_dead = [False] * len(rates)
        self.diverged = False

    @property
    def weights(self) -> np.ndarray:
        """Meta weights over the sub-learners (not over the experts)."""
        return self.u

    def step(self, p) -> StepOutcome:
        preds = np.zeros(len(self.subs))
        for k, sub in enumerate(self.subs):
            if self.sub_dead[k]:
                continue
            out = sub.step(p)
            if out.diverged:
                self.sub_dead[k] = True
            else:
                preds[k] = out.prediction
        mp, self.u = meta_bayes_step(self.u, preds)
        if mp == 0.0:
            self.diverged = True
            return StepOutcome(0.0, INFINITE_LOSS, None, self.u.copy())
        return StepOutcome(mp, -math.log(mp), None, self.u.copy())


@dataclass
class LearnerTrace:
    """Per-round record of one learner's run over a stream."""

    name: str
    predictions: np.ndarray
    losses: np.ndarray
    rates: np.ndarray
    weights: np.ndarray
    ledger: LossLedger
    halted_at: int | None = None

    @property
    def rounds(self) -> int:
        return len(self.losses)

    @property
    def diverged(self) -> bool:
        return self.ledger.diverged

    @property
    def cumulative_losses(self) -> np.ndarray:
        return np.cumsum(self.losses)

    @property
    def total_loss(self) -> float:
        """Infinite if any recorded round diverged."""
        return self.ledger.total_loss

    @property
    def finite_loss(self) -> float:
        return self.ledger.cumulative_loss

    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.losses)


def run_learner(learner, stream, on_divergence: str = "continue") -> LearnerTrace:
    """Drive a learner over a stream, recording losses on a ledger.

    ``on_divergence="halt"`` stops at the first infinite loss, leaving a
    partial trace; ``"continue"`` keeps stepping (the learner's weights are
    unchanged on diverged rounds).
    """
    if on_divergence not in ("halt", "continue"):
        raise ValueError(f"unknown divergence policy {on_divergence!r}")
    halt = on_divergence == "halt"
    preds, losses, rates, weights = [], [], [], []
    halted_at = None
    step = learner.step
    if halt:
        for t, p in enumerate(stream, 1):
            out = step(p)
            preds.append(out.prediction)
            losses.append(out.loss)
            rates.append(math.nan if out.rate_used is None else out.rate_used)
            weights.append(out.new_weights)
            if math.isinf(out.loss):
                halted_at = t
                break
    else:
        for p in stream:
            out = step(p)
            preds.append(out.prediction)
            losses.append(out.loss)
            rates.append(math.nan if out.rate_used is None else out.rate_used)
            weights.append(out.new_weights)
    loss_arr = np.asarray(losses)
    finite = np.isfinite(loss_arr)
    ledger = LossLedger(
        per_round_loss=list(losses),
        cumulative_loss=float(loss_arr[finite].sum()),
        diverged=bool(not finite.all()),
    )
    return LearnerTrace(
        name=getattr(learner, "name", type(learner).__name__),
        predictions=np.asarray(preds),
        losses=loss_arr,
        rates=np.asarray(rates),
        weights=np.asarray(weights),
        ledger=ledger,
        halted_at=halted_at,
    )
