"""Streaming change detectors for periodic slot models.

Every detector is a sequential state machine: ``step(x)`` consumes one
observation, advances the internal clock, and reports the updated statistic
together with the alarm decision.  Time indices are 1-based and global; the
slot governing observation ``n`` is ``(n - 1) mod T``, so the per-sample
log-likelihood-ratio function used at time ``n`` equals the one used at
``n + T``.

Statistics and post-alarm behavior:

* :class:`ShiryaevDetector` tracks the posterior probability ``p_n`` that the
  change has already happened, via ``p_n = q g_n(x) / (q g_n(x) + (1-q) f_n(x))``
  with ``q = p_{n-1} + (1 - p_{n-1}) rho``, and alarms when ``p_n`` reaches
  the (possibly per-slot) threshold.  The belief is stored as log-odds so the
  recursion stays informative arbitrarily close to 1.
* :class:`CusumDetector` runs ``W_n = max(W_{n-1}, 0) + z_n`` on per-sample
  log-likelihood ratios; the positive part is applied before the add, so the
  score itself may go negative.
* :class:`MixtureShiryaev` runs one posterior recursion per candidate changed
  slot subset and alarms when the weighted posterior odds exceed a threshold.
  The recursion requires a geometric change-point prior.
* :class:`MultistreamMixture` is the same mixture over candidate changed
  stream subsets; each component's per-sample score sums log-likelihood
  ratios over its member streams.
* :class:`ClassifierBankDetector` maintains cumulative pairwise
  log-likelihood-ratio sums ``C_lm`` and, per class ``l``, the statistic
  ``max_k min_{m != l} (C_lm(n) - C_lm(k-1))`` over window start points; it
  alarms and names a class when any such statistic clears the threshold.

With ``reset_on_alarm`` detectors zero their statistic after each alarm and
keep monitoring, which is the continuous-monitoring mode used for repeated
events.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .densities import Gaussian, Poisson, llr
from .model import ClassBank, IpidLaw, MultislotFamily, MultistreamConfig, PeriodicThresholds

_NEG_INF = float("-inf")
_POS_INF = float("inf")


@dataclass(frozen=True)
class StepResult:
    """One detector transition: statistic after the update plus the decision."""

    time_index: int
    statistic: float
    alarm: bool
    decided_class: int | None = None


def _logit(p: float) -> float:
    if p <= 0.0:
        return _NEG_INF
    if p >= 1.0:
        return _POS_INF
    return math.log(p / (1.0 - p))


def _expit(log_odds: float) -> float:
    if log_odds == _NEG_INF:
        return 0.0
    if log_odds == _POS_INF:
        return 1.0
    if log_odds >= 0.0:
        return 1.0 / (1.0 + math.exp(-log_odds))
    e = math.exp(log_odds)
    return e / (1.0 + e)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return _POS_INF


class _SlotLlr:
    """Per-slot log-likelihood-ratio evaluators for a (numerator, denominator) law pair.

    Within-family slot pairs reduce to ``c0 + c1 x + c2 x^2`` (Poisson factorials
    cancel), which both the scalar and the vectorized paths exploit; mixed-family
    slots fall back to direct log-density differences.
    """

    def __init__(self, num_slots, den_slots):
        if len(num_slots) != len(den_slots):
            raise ValueError("slot vectors must have equal length")
        self.period = len(num_slots)
        self._num = tuple(num_slots)
        self._den = tuple(den_slots)
        c0 = np.zeros(self.period)
        c1 = np.zeros(self.period)
        c2 = np.zeros(self.period)
        poly = np.ones(self.period, dtype=bool)
        for i, (g, f) in enumerate(zip(num_slots, den_slots)):
            if isinstance(g, Gaussian) and isinstance(f, Gaussian):
                c0[i] = 0.5 * (math.log(f.variance / g.variance)
                               + f.mean * f.mean / f.variance - g.mean * g.mean / g.variance)
                c1[i] = g.mean / g.variance - f.mean / f.variance
                c2[i] = 0.5 * (1.0 / f.variance - 1.0 / g.variance)
            elif isinstance(g, Poisson) and isinstance(f, Poisson):
                c0[i] = f.rate - g.rate
                c1[i] = math.log(g.rate / f.rate)
            else:
                poly[i] = False
        self._c0 = c0
        self._c1 = c1
        self._c2 = c2
        self._poly = poly
        self._c0l = c0.tolist()
        self._c1l = c1.tolist()
        self._c2l = c2.tolist()
        self._polyl = poly.tolist()

    def value(self, slot: int, x: float) -> float:
        if self._polyl[slot]:
            x = float(x)
            if not math.isfinite(x):
                raise ValueError(f"observation must be finite, got {x}")
            return self._c0l[slot] + x * (self._c1l[slot] + x * self._c2l[slot])
        return llr(self._num[slot], self._den[slot], x)

    def profile(self, xs: np.ndarray, start_slot: int) -> np.ndarray:
        """Scores for a run of observations whose first element sits in ``start_slot``."""
        xs = np.asarray(xs, dtype=float)
        if xs.size and not np.all(np.isfinite(xs)):
            raise ValueError("observations must be finite")
        slots = (start_slot + np.arange(xs.size)) % self.period
        z = self._c0[slots] + xs * (self._c1[slots] + xs * self._c2[slots])
        if not self._poly.all():
            bad = ~self._poly[slots]
            for j in np.nonzero(bad)[0]:
                s = int(slots[j])
                z[j] = llr(self._num[s], self._den[s], float(xs[j]))
        return z


def _threshold_logits(threshold, period: int) -> list[float]:
    if isinstance(threshold, (int, float)):
        threshold = PeriodicThresholds.single(float(threshold))
    if len(threshold.values) not in (1, period):
        raise ValueError(f"need 1 or {period} threshold values, got {len(threshold.values)}")
    return [_logit(threshold.for_slot(s)) for s in range(period)]


class ShiryaevDetector:
    """Posterior-probability rule for a known pre/post law pair.

    ``threshold`` is a belief-scale value in [0, 1] or a
    :class:`~periodetect.model.PeriodicThresholds`; observation ``n`` is
    compared against the slot-``(n-1) mod T`` entry.  ``rho`` is the geometric
    prior parameter of the change point (``rho = 0`` freezes the belief at its
    starting value of zero, which is occasionally useful for diagnostics).
    """

    def __init__(self, pre: IpidLaw, post: IpidLaw, rho: float, threshold,
                 *, reset_on_alarm: bool = False, start_time: int = 0):
        if pre.period != post.period:
            raise ValueError("pre and post laws must share one period")
        if not (0.0 <= rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {rho}")
        self.pre = pre
        self.post = post
        self.rho = float(rho)
        self.threshold = threshold
        self.reset_on_alarm = bool(reset_on_alarm)
        self.start_time = int(start_time)
        self.period = pre.period
        self._llr = _SlotLlr(post.slots, pre.slots)
        self._logit_thresholds = _threshold_logits(threshold, pre.period)
        self._ln_rho = math.log(rho) if rho > 0.0 else _NEG_INF
        self._ln_1m_rho = math.log1p(-rho)
        self._log_odds = _NEG_INF
        self._time = self.start_time

    def fresh(self, start_time: int | None = None) -> "ShiryaevDetector":
        return ShiryaevDetector(
            self.pre, self.post, self.rho, self.threshold,
            reset_on_alarm=self.reset_on_alarm,
            start_time=self.start_time if start_time is None else start_time,
        )

    def reset(self) -> None:
        """Zero the belief; the clock keeps running."""
        self._log_odds = _NEG_INF

    @property
    def time(self) -> int:
        return self._time

    @property
    def belief(self) -> float:
        return _expit(self._log_odds)

    def _mixed_log_odds(self) -> float:
        lo = self._log_odds
        if self._ln_rho == _NEG_INF:
            return lo
        if lo == _NEG_INF:
            return self._ln_rho - self._ln_1m_rho
        m = lo if lo > self._ln_rho else self._ln_rho
        return m + math.log(math.exp(lo - m) + math.exp(self._ln_rho - m)) - self._ln_1m_rho

    def step(self, x: float) -> StepResult:
        lo = self._mixed_log_odds() + self._llr.value(self._time % self.period, x)
        self._time += 1
        slot = (self._time - 1) % self.period
        self._log_odds = lo
        alarm = lo >= self._logit_thresholds[slot]
        result = StepResult(time_index=self._time, statistic=_expit(lo), alarm=alarm)
        if alarm and self.reset_on_alarm:
            self.reset()
        return result

    def run_to_alarm(self, xs) -> StepResult | None:
        """Consume observations until the first alarm; return it, or None if none fires."""
        z = self._llr.profile(np.asarray(xs, dtype=float), self._time % self.period)
        thr = self._logit_thresholds
        period = self.period
        ln_rho = self._ln_rho
        ln_1m_rho = self._ln_1m_rho
        lo = self._log_odds
        t = self._time
        for zi in z.tolist():
            if ln_rho == _NEG_INF:
                lt = lo
            elif lo == _NEG_INF:
                lt = ln_rho - ln_1m_rho
            else:
                m = lo if lo > ln_rho else ln_rho
                lt = m + math.log(math.exp(lo - m) + math.exp(ln_rho - m)) - ln_1m_rho
            lo = lt + zi
            t += 1
            if lo >= thr[(t - 1) % period]:
                self._time = t
                self._log_odds = lo
                result = StepResult(time_index=t, statistic=_expit(lo), alarm=True)
                if self.reset_on_alarm:
                    self.reset()
                return result
        self._time = t
        self._log_odds = lo
        return None


def robust_shiryaev(pre: IpidLaw, least_favorable: IpidLaw, rho: float, threshold,
                    **kwargs) -> ShiryaevDetector:
    """Posterior rule designed against the least favorable member of an uncertainty family.

    The detector is an ordinary :class:`ShiryaevDetector` whose post-change law
    is the least favorable law; callers should certify the law with
    :func:`periodetect.robust.validate_lfl` (or construct it with
    :func:`periodetect.robust.select_lfl`) unless they trust it by design.
    """
    return ShiryaevDetector(pre, least_favorable, rho, threshold, **kwargs)


class CusumDetector:
    """Cumulative-sum score test between a baseline law and one alternative law."""

    def __init__(self, baseline: IpidLaw, alternative: IpidLaw, threshold: float,
                 *, reset_on_alarm: bool = False, start_time: int = 0):
        if baseline.period != alternative.period:
            raise ValueError("laws must share one period")
        self.baseline = baseline
        self.alternative = alternative
        self.threshold = float(threshold)
        self.reset_on_alarm = bool(reset_on_alarm)
        self.start_time = int(start_time)
        self.period = baseline.period
        self._llr = _SlotLlr(alternative.slots, baseline.slots)
        self._score = 0.0
        self._time = self.start_time

    def fresh(self, start_time: int | None = None) -> "CusumDetector":
        return CusumDetector(
            self.baseline, self.alternative, self.threshold,
            reset_on_alarm=self.reset_on_alarm,
            start_time=self.start_time if start_time is None else start_time,
        )

    def reset(self) -> None:
        self._score = 0.0

    @property
    def time(self) -> int:
        return self._time

    @property
    def score(self) -> float:
        return self._score

    def step(self, x: float) -> StepResult:
        z = self._llr.value(self._time % self.period, x)
        self._time += 1
        score = (self._score if self._score > 0.0 else 0.0) + z
        self._score = score
        alarm = score >= self.threshold
        result = StepResult(time_index=self._time, statistic=score, alarm=alarm)
        if alarm and self.reset_on_alarm:
            self.reset()
        return result

    def run_to_alarm(self, xs) -> StepResult | None:
        """Vectorized scan: the recursion equals ``S_n - min_{j < n} S_j`` with the
        carry-in score folded into the prefix floor."""
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return None
        z = self._llr.profile(xs, self._time % self.period)
        s = np.concatenate(([0.0], np.cumsum(z)))
        floor = np.minimum(np.minimum.accumulate(s[:-1]), -max(self._score, 0.0))
        w = s[1:] - floor
        hits = np.nonzero(w >= self.threshold)[0]
        if hits.size:
            k = int(hits[0])
            self._time += k + 1
            self._score = float(w[k])
            result = StepResult(time_index=self._time, statistic=self._score, alarm=True)
            if self.reset_on_alarm:
                self.reset()
            return result
        self._time += xs.size
        self._score = float(w[-1])
        return None


class MixtureShiryaev:
    """Weighted mixture of posterior-odds recursions over candidate changed-slot subsets.

    The reported statistic is the mixture of per-candidate posterior odds; it
    equals the prior-weighted double sum over change times and candidates of
    likelihood-ratio products, but is computed with one recursion per
    candidate.  A geometric prior is required for that recursion to be exact;
    tabulated priors are not supported.  When a component's odds overflow the
    statistic is reported as ``inf`` and the alarm is forced.
    """

    def __init__(self, family: MultislotFamily, rho: float, threshold: float,
                 *, reset_on_alarm: bool = False, start_time: int = 0):
        if not (0.0 < rho < 1.0):
            raise ValueError(f"rho must lie in (0, 1), got {rho}")
        self.family = family
        self.rho = float(rho)
        self.threshold = float(threshold)
        self.reset_on_alarm = bool(reset_on_alarm)
        self.start_time = int(start_time)
        self.period = family.period
        pre = family.base_pre
        self._tables = []
        for s in family.candidates:
            num = tuple(family.base_post.slots[i] if i in s else pre.slots[i] for i in range(self.period))
            self._tables.append(_SlotLlr(num, pre.slots))
        self._weights = list(family.weights)
        self._ln_rho = math.log(rho)
        self._ln_1m_rho = math.log1p(-rho)
        self._log_odds = [_NEG_INF] * len(self._tables)
        self._time = self.start_time

    def fresh(self, start_time: int | None = None) -> "MixtureShiryaev":
        return MixtureShiryaev(
            self.family, self.rho, self.threshold,
            reset_on_alarm=self.reset_on_alarm,
            start_time=self.start_time if start_time is None else start_time,
        )

    def reset(self) -> None:
        self._log_odds = [_NEG_INF] * len(self._tables)

    @property
    def time(self) -> int:
        return self._time

    @property
    def statistic(self) -> float:
        return math.fsum(w * _safe_exp(lo) for w, lo in zip(self._weights, self._log_odds))

    def _advance(self, zs) -> None:
        ln_rho = self._ln_rho
        ln_1m_rho = self._ln_1m_rho
        los = self._log_odds
        for j, zj in enumerate(zs):
            lo = los[j]
            if lo == _NEG_INF:
                lt = ln_rho - ln_1m_rho
            else:
                m = lo if lo > ln_rho else ln_rho
                lt = m + math.log(math.exp(lo - m) + math.exp(ln_rho - m)) - ln_1m_rho
            los[j] = lt + zj

    def step(self, x: float) -> StepResult:
        slot = self._time % self.period
        self._advance([t.value(slot, x) for t in self._tables])
        self._time += 1
        stat = self.statistic
        alarm = stat > self.threshold
        result = StepResult(time_index=self._time, statistic=stat, alarm=alarm)
        if alarm and self.reset_on_alarm:
            self.reset()
        return result

    def run_to_alarm(self, xs) -> StepResult | None:
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            return None
        start_slot = self._time % self.period
        z = np.stack([t.profile(xs, start_slot) for t in self._tables], axis=1)
        for row in z:
            self._advance(row.tolist())
            self._time += 1
            stat = self.statistic
            if stat > self.threshold:
                result = StepResult(time_index=self._time, statistic=stat, alarm=True)
                if self.reset_on_alarm:
                    self.reset()
                return result
        return None


class MultistreamMixture:
    """Mixture rule over candidate changed-stream subsets.

    Each observation is a vector with one entry per stream; a candidate's
    per-sample score is the sum of its member streams' log-likelihood ratios.
    """

    def __init__(self, config: MultistreamConfig, rho: float, threshold: float,
                 *, reset_on_alarm: bool = False, start_time: int = 0):
        if not (0.0 < rho < 1.0):
            raise ValueError(f"rho must lie in (0, 1), got {rho}")
        self.config = config
        self.rho = float(rho)
        self.threshold = float(threshold)
        self.reset_on_alarm = bool(reset_on_alarm)
        self.start_time = int(start_time)
        self.period = config.period
        self.num_streams = config.num_streams
        self._stream_tables = [_SlotLlr(post.slots, pre.slots) for pre, post in config.streams]
        self._members = [sorted(b) for b in config.candidates]
        self._weights = list(config.weights)
        self._ln_rho = math.log(rho)
        self._ln_1m_rho = math.log1p(-rho)
        self._log_odds = [_NEG_INF] * len(self._members)
        self._time = self.start_time

    def fresh(self, start_time: int | None = None) -> "MultistreamMixture":
        return MultistreamMixture(
            self.config, self.rho, self.threshold,
            reset_on_alarm=self.reset_on_alarm,
            start_time=self.start_time if start_time is None else start_time,
        )

    def reset(self) -> None:
        self._log_odds = [_NEG_INF] * len(self._members)

    @property
    def time(self) -> int:
        return self._time

    @property
    def statistic(self) -> float:
        return math.fsum(w * _safe_exp(lo) for w, lo in zip(self._weights, self._log_odds))

    def _advance(self, zs) -> None:
        ln_rho = self._ln_rho
        ln_1m_rho = self._ln_1m_rho
        los = self._log_odds
        for j, zj in enumerate(zs):
            lo = los[j]
            if lo == _NEG_INF:
                lt = ln_rho - ln_1m_rho
            else:
                m = lo if lo > ln_rho else ln_rho
                lt = m + math.log(math.exp(lo - m) + math.exp(ln_rho - m)) - ln_1m_rho
            los[j] = lt + zj

    def _scores(self, slot: int, x_vec) -> list[float]:
        per_stream = [self._stream_tables[i].value(slot, x_vec[i]) for i in range(self.num_streams)]
        return [math.fsum(per_stream[i] for i in members) for members in self._members]

    def step(self, x_vec) -> StepResult:
        x_vec = np.asarray(x_vec, dtype=float).reshape(-1)
        if x_vec.size != self.num_streams:
            raise ValueError(f"expected {self.num_streams} per-stream observations, got {x_vec.size}")
        slot = self._time % self.period
        self._advance(self._scores(slot, x_vec))
        self._time += 1
        stat = self.statistic
        alarm = stat > self.threshold
        result = StepResult(time_index=self._time, statistic=stat, alarm=alarm)
        if alarm and self.reset_on_alarm:
            self.reset()
        return result

    def run_to_alarm(self, xs) -> StepResult | None:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.num_streams:
            raise ValueError(f"expected an (n, {self.num_streams}) observation matrix")
        if xs.shape[0] == 0:
            return None
        start_slot = self._time % self.period
        per_stream = np.stack(
            [t.profile(xs[:, i], start_slot) for i, t in enumerate(self._stream_tables)], axis=1
        )
        z = np.stack([per_stream[:, members].sum(axis=1) for members in self._members], axis=1)
        for row in z:
            self._advance(row.tolist())
            self._time += 1
            stat = self.statistic
            if stat > self.threshold:
                result = StepResult(time_index=self._time, statistic=stat, alarm=True)
                if self.reset_on_alarm:
                    self.reset()
                return result
        return None


class ClassifierBankDetector:
    """Joint detection and isolation against a bank of candidate post-change laws.

    For each class ``l`` the statistic is the best window of the running
    pairwise score sums, ``max_k min_{m != l} (C_lm(n) - C_lm(k-1))``; with
    ``window=L`` the start point ``k`` is restricted to the last ``L + 1``
    steps, which bounds memory and per-step work by O(L M^2); ``window=None``
    keeps all history (the full test).  On alarm, among the classes whose
    statistic cleared the threshold, the one with the largest statistic is
    declared, ties going to the smallest class index.
    """

    def __init__(self, bank: ClassBank, threshold: float, *, window: int | None = None,
                 reset_on_alarm: bool = False, start_time: int = 0):
        if window is not None and window < 1:
            raise ValueError("window must be >= 1 when given")
        self.bank = bank
        self.threshold = float(threshold)
        self.window = window
        self.reset_on_alarm = bool(reset_on_alarm)
        self.start_time = int(start_time)
        self.period = bank.period
        m = bank.num_classes
        active = bank.active_slots
        self._pairs: list[tuple[int, int]] = []
        self._tables: list[_SlotLlr] = []
        for ell in range(1, m + 1):
            for mm in range(0, m + 1):
                if mm == ell:
                    continue
                num = tuple(
                    bank.laws[ell].slots[i] if (active is None or i in active) else bank.laws[mm].slots[i]
                    for i in range(self.period)
                )
                self._pairs.append((ell, mm))
                self._tables.append(_SlotLlr(num, bank.laws[mm].slots))
        self._pairs_of = [
            [p for p, (ell, _) in enumerate(self._pairs) if ell == label] for label in range(m + 1)
        ]
        self.num_classes = m
        self._sums = [0.0] * len(self._pairs)
        self._history: list[tuple[float, ...]] = [tuple(self._sums)]
        self._last_stats = [_NEG_INF] * (m + 1)
        self._time = self.start_time

    def fresh(self, start_time: int | None = None) -> "ClassifierBankDetector":
        return ClassifierBankDetector(
            self.bank, self.threshold, window=self.window,
            reset_on_alarm=self.reset_on_alarm,
            start_time=self.start_time if start_time is None else start_time,
        )

    def reset(self) -> None:
        self._sums = [0.0] * len(self._pairs)
        self._history = [tuple(self._sums)]
        self._last_stats = [_NEG_INF] * (self.num_classes + 1)

    @property
    def time(self) -> int:
        return self._time

    def class_statistics(self) -> list[float]:
        """Per-class windowed statistics as of the last step (index 0 is a placeholder)."""
        return list(self._last_stats)

    def _compute_stats(self) -> list[float]:
        sums = self._sums
        stats = [_NEG_INF] * (self.num_classes + 1)
        for label in range(1, self.num_classes + 1):
            pair_ids = self._pairs_of[label]
            best = _NEG_INF
            for checkpoint in self._history:
                low = _POS_INF
                for p in pair_ids:
                    diff = sums[p] - checkpoint[p]
                    if diff < low:
                        low = diff
                if low > best:
                    best = low
            stats[label] = best
        return stats

    def step(self, x: float) -> StepResult:
        slot = self._time % self.period
        sums = self._sums
        for p, table in enumerate(self._tables):
            sums[p] += table.value(slot, x)
        self._time += 1
        stats = self._compute_stats()
        self._last_stats = stats
        self._history.append(tuple(sums))
        if self.window is not None and len(self._history) > self.window + 1:
            del self._history[0]
        crossed = [label for label in range(1, self.num_classes + 1) if stats[label] >= self.threshold]
        decided = None
        if crossed:
            best = max(stats[label] for label in crossed)
            decided = min(label for label in crossed if stats[label] == best)
        statistic = max(stats[1:])
        result = StepResult(
            time_index=self._time, statistic=statistic, alarm=bool(crossed), decided_class=decided
        )
        if crossed and self.reset_on_alarm:
            self.reset()
        return result

    def run_to_alarm(self, xs) -> StepResult | None:
        for x in np.asarray(xs, dtype=float):
            result = self.step(float(x))
            if result.alarm:
                return result
        return None


def run(detector, observations, stop_on_alarm: bool = False) -> list[StepResult]:
    """Feed observations through any detector, collecting one result per step.

    With ``stop_on_alarm`` the trajectory is truncated at the first alarm.
    """
    trajectory: list[StepResult] = []
    for x in observations:
        result = detector.step(x)
        trajectory.append(result)
        if stop_on_alarm and result.alarm:
            break
    return trajectory


def write_trajectory_csv(path, trajectory: list[StepResult], observations, period: int) -> None:
    """Dump a trajectory as CSV: time_index, slot, observation, statistic, alarm, decided_class."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_index", "slot", "observation", "statistic", "alarm", "decided_class"])
        for result, obs in zip(trajectory, observations):
            if isinstance(obs, (list, tuple, np.ndarray)):
                obs_repr = ";".join(repr(float(v)) for v in np.asarray(obs).reshape(-1))
            else:
                obs_repr = repr(float(obs))
            writer.writerow([
                result.time_index,
                (result.time_index - 1) % period,
                obs_repr,
                repr(result.statistic),
                int(result.alarm),
                "" if result.decided_class is None else result.decided_class,
            ])
