"""Retransmission timeout estimation (SRTT / RTTVAR, Jacobson-Karels)."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .engine import NS_PER_S, ms

MIN_RTO = ms(200)
MAX_RTO = 60 * NS_PER_S
CLOCK_GRANULARITY = ms(1)
INITIAL_RTO = NS_PER_S


@dataclass(frozen=True)
class RttEstimator:
    srtt: int = 0
    rttvar: int = 0
    rto: int = INITIAL_RTO
    initialized: bool = False
    min_rto: int = MIN_RTO
    max_rto: int = MAX_RTO
    granularity: int = CLOCK_GRANULARITY

    def backed_off(self) -> "RttEstimator":
        return replace(self, rto=min(2 * self.rto, self.max_rto))


def rto_update(est: RttEstimator, rtt_sample: int) -> RttEstimator:
    """Fold one RTT sample (ns) into the estimator.

    All arithmetic is on integer nanoseconds; the 1/4 and 1/8 weights are
    applied as exact integer divisions of the combined numerator.
    """
    if rtt_sample <= 0:
        raise ValueError(f"RTT sample must be positive, got {rtt_sample}")
    if not est.initialized:
        srtt = rtt_sample
        rttvar = rtt_sample // 2
    else:
        rttvar = (3 * est.rttvar + abs(est.srtt - rtt_sample)) // 4
        srtt = (7 * est.srtt + rtt_sample) // 8
    rto = srtt + max(est.granularity, 4 * rttvar)
    rto = min(max(rto, est.min_rto), est.max_rto)
    return replace(est, srtt=srtt, rttvar=rttvar, rto=rto, initialized=True)
