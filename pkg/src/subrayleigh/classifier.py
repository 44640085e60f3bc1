"""Ratio-test classification of one source versus two.

A session measures photon counts under two pump settings: G with the
Gaussian pump and O with the optimized (anti-symmetric) pump.  The test
statistic is the extinction ratio R = O / G.  The optimized pump is
chosen to convert the two-source state preferentially, so R is small
under hypothesis A (one source) and large under hypothesis B (two
sources); a threshold between the two shot-noise bands decides the
session.

With pure shot noise the standard error of the ratio is
dR = R sqrt((O + G) / (O G)), the faithful-discrimination condition is
R_A + dR_A < R_B - dR_B, and the threshold splits the gap:
R_t = (R_A + R_B + dR_A - dR_B) / 2.  At the balanced operating point
(equal expected counts in both channels under B) the smallest total
budget N = G_B + O_B for which the bands separate is

    n_min(R_A) = 2 (sqrt(2) + sqrt(R_A (1 + R_A)))^2 / (R_A - 1)^2.

Fidelity is the probability of classifying correctly over repeated
sessions with both hypotheses equally likely; sessions whose ratio is
undefined (a zero count) are counted as failures.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .photon_stats import CountPair

_WILSON_Z = 1.959963984540054  # two-sided 95%
_FIDELITY_CHUNKS = 32  # fixed substream count keeps results independent of worker count


class InvalidRatioError(ValueError):
    """Raised when an operation requires a valid (nonzero-count) ratio."""


@dataclass(frozen=True)
class RatioEstimate:
    """Extinction ratio R = O / G with its shot-noise standard error.

    ``valid`` is False when either count is zero, which leaves the ratio
    or its error undefined; invalid estimates classify as inconclusive.
    """

    R: float
    dR: float
    valid: bool

    @property
    def upper(self) -> float:
        return self.R + self.dR

    @property
    def lower(self) -> float:
        return self.R - self.dR


@dataclass(frozen=True)
class Threshold:
    """Decision boundary on the extinction ratio."""

    R_t: float


class Verdict(Enum):
    A = "A"
    B = "B"
    INCONCLUSIVE = "inconclusive"


def ratio(counts: CountPair) -> RatioEstimate:
    """Extinction ratio and its shot-noise error for one session's counts."""
    if counts.G == 0 or counts.O == 0:
        return RatioEstimate(R=math.nan, dR=math.nan, valid=False)
    return expected_ratio(float(counts.G), float(counts.O))


def expected_ratio(lam_g: float, lam_o: float) -> RatioEstimate:
    """Ratio estimate evaluated at (expected) counts, for planning purposes."""
    if lam_g <= 0 or lam_o <= 0:
        return RatioEstimate(R=math.nan, dR=math.nan, valid=False)
    r = lam_o / lam_g
    return RatioEstimate(R=r, dR=r * math.sqrt((lam_o + lam_g) / (lam_o * lam_g)), valid=True)


def threshold(ra: RatioEstimate, rb: RatioEstimate) -> Threshold:
    """Threshold ratio splitting the two hypotheses' shot-noise bands."""
    if not (ra.valid and rb.valid):
        raise InvalidRatioError("threshold needs valid ratio estimates for both hypotheses")
    return Threshold(R_t=(ra.R + rb.R + ra.dR - rb.dR) / 2.0)


def discriminable(ra: RatioEstimate, rb: RatioEstimate) -> bool:
    """True when the one-sigma ratio bands separate (strict inequality)."""
    if not (ra.valid and rb.valid):
        raise InvalidRatioError("discriminability needs valid ratio estimates")
    return ra.R + ra.dR < rb.R - rb.dR


def classify(counts: CountPair, t: Threshold) -> Verdict:
    """Decide the session: A below threshold, B at or above, inconclusive
    when the ratio is undefined."""
    est = ratio(counts)
    if not est.valid:
        return Verdict.INCONCLUSIVE
    return Verdict.A if est.R < t.R_t else Verdict.B


def n_min(r_a: float) -> float:
    """Minimum total two-source photon budget for band separation.

    Valid for r_a >= 0; diverges as r_a -> 1, where the optimized pump no
    longer distinguishes the hypotheses at all.
    """
    if r_a < 0:
        raise ValueError(f"R_A must be non-negative, got {r_a}")
    if r_a == 1.0:
        raise ValueError("R_A = 1 leaves no contrast; the required budget diverges")
    return 2.0 * (math.sqrt(2.0) + math.sqrt(r_a * (1.0 + r_a))) ** 2 / (r_a - 1.0) ** 2


def solve_r_a_for_n_min(target: float) -> float:
    """Invert the minimum-budget formula: find r_a in [0, 1) with n_min(r_a) = target."""
    if target < 4.0:
        raise ValueError(f"minimum budget is 4 photons at R_A = 0; {target} is unreachable")
    if target == 4.0:
        return 0.0
    return float(brentq(lambda r: n_min(r) - target, 0.0, 1.0 - 1e-12, xtol=1e-15, rtol=8.9e-16))


# --------------------------------------------------------------------------
# Session scenarios and Monte Carlo fidelity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionScenario:
    """Everything needed to simulate classification sessions.

    Rates are expected detections per pulse (dark counts included) for
    each (pump, hypothesis) combination; the pulse budget is per pump
    setting.  ``r_t`` is the decision threshold in force.
    """

    rate_g_a: float
    rate_o_a: float
    rate_g_b: float
    rate_o_b: float
    pulses_gaussian: float
    pulses_optimized: float
    r_t: float

    @property
    def lam_g_a(self) -> float:
        return self.rate_g_a * self.pulses_gaussian

    @property
    def lam_o_a(self) -> float:
        return self.rate_o_a * self.pulses_optimized

    @property
    def lam_g_b(self) -> float:
        return self.rate_g_b * self.pulses_gaussian

    @property
    def lam_o_b(self) -> float:
        return self.rate_o_b * self.pulses_optimized

    @property
    def n_ave(self) -> float:
        """Expected total counts per two-source session, <G_B + O_B>."""
        return self.lam_g_b + self.lam_o_b

    def expected_ratio_a(self) -> RatioEstimate:
        return expected_ratio(self.lam_g_a, self.lam_o_a)

    def expected_ratio_b(self) -> RatioEstimate:
        return expected_ratio(self.lam_g_b, self.lam_o_b)

    def with_threshold(self, t: Threshold) -> "SessionScenario":
        return replace(self, r_t=t.R_t)

    @classmethod
    def from_rates(
        cls,
        rate_g_a: float,
        rate_o_a: float,
        rate_g_b: float,
        rate_o_b: float,
        n_ave: float,
    ) -> "SessionScenario":
        """Build a scenario hitting a target <G_B + O_B> with an equal pulse
        split and the analytic (expected-count) threshold."""
        rate_b_total = rate_g_b + rate_o_b
        if rate_b_total <= 0:
            raise ValueError("two-source rates must be positive to set a budget")
        pulses = n_ave / rate_b_total
        scenario = cls(
            rate_g_a=rate_g_a,
            rate_o_a=rate_o_a,
            rate_g_b=rate_g_b,
            rate_o_b=rate_o_b,
            pulses_gaussian=pulses,
            pulses_optimized=pulses,
            r_t=math.nan,
        )
        return scenario.with_threshold(analytic_threshold(scenario))


def analytic_threshold(scenario: SessionScenario) -> Threshold:
    """Planning-mode threshold, computed from expected counts."""
    return threshold(scenario.expected_ratio_a(), scenario.expected_ratio_b())


def calibration_threshold(scenario: SessionScenario, seed: int) -> Threshold:
    """Experiment-emulation threshold from one sampled calibration run per
    hypothesis.  Raises InvalidRatioError if a calibration count comes up
    zero (too few photons to calibrate)."""
    rng = np.random.default_rng(seed)
    g_a = int(rng.poisson(scenario.lam_g_a))
    o_a = int(rng.poisson(scenario.lam_o_a))
    g_b = int(rng.poisson(scenario.lam_g_b))
    o_b = int(rng.poisson(scenario.lam_o_b))
    return threshold(ratio(CountPair(g_a, o_a)), ratio(CountPair(g_b, o_b)))


@dataclass(frozen=True)
class FidelityEstimate:
    """Monte Carlo classification fidelity with a Wilson 95% interval."""

    fidelity: float
    ci_lo: float
    ci_hi: float
    trials: int
    correct: int


def wilson_interval(successes: int, trials: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _fidelity_chunk(scenario: SessionScenario, sessions: int, seed_seq: np.random.SeedSequence) -> int:
    """Number of correct classifications over ``sessions`` independent sessions."""
    if sessions == 0:
        return 0
    rng = np.random.default_rng(seed_seq)
    is_b = rng.random(sessions) < 0.5
    lam_g = np.where(is_b, scenario.lam_g_b, scenario.lam_g_a)
    lam_o = np.where(is_b, scenario.lam_o_b, scenario.lam_o_a)
    g = rng.poisson(lam_g)
    o = rng.poisson(lam_o)
    valid = (g > 0) & (o > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(valid, o / np.maximum(g, 1), np.nan)
    decide_b = r >= scenario.r_t
    correct = valid & (decide_b == is_b)
    return int(np.count_nonzero(correct))


def fidelity(scenario: SessionScenario, trials: int, seed: int, jobs: int = 1) -> FidelityEstimate:
    """Monte Carlo estimate of the classification fidelity.

    Ground truth is drawn A/B with probability 1/2 each; every session is
    classified against the scenario threshold and inconclusive sessions
    count as incorrect.  Trials are spread over a fixed number of seeded
    substreams, so the result depends only on (scenario, trials, seed),
    not on the worker count.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    children = np.random.SeedSequence(seed).spawn(_FIDELITY_CHUNKS)
    base, extra = divmod(trials, _FIDELITY_CHUNKS)
    sizes = [base + (1 if i < extra else 0) for i in range(_FIDELITY_CHUNKS)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            corrects = list(pool.map(_fidelity_chunk, [scenario] * _FIDELITY_CHUNKS, sizes, children))
    else:
        corrects = [_fidelity_chunk(scenario, n, s) for n, s in zip(sizes, children)]
    correct = sum(corrects)
    ci_lo, ci_hi = wilson_interval(correct, trials)
    return FidelityEstimate(
        fidelity=correct / trials,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        trials=trials,
        correct=correct,
    )
