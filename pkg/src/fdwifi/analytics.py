"""Closed-form normalized goodputs for the collision-free access model.

Every node (stations plus the access point) wins the channel equally often.
Results are exact rationals normalized so the all-half-duplex system has a sum
goodput of 1; they serve as oracles for the simulator's long-run shares.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction


class Scenario(enum.Enum):
    FD_ONLY = "fd_only"
    HD_ONLY = "hd_only"
    MIXED_CASE1 = "mixed_case1"


@dataclass(frozen=True)
class Population:
    n_fd: int = 0
    n_hd: int = 0

    def __post_init__(self):
        if self.n_fd < 0 or self.n_hd < 0:
            raise ValueError("node counts must be non-negative")
        if self.n < 1:
            raise ValueError("population must contain at least one station")

    @property
    def n(self) -> int:
        return self.n_fd + self.n_hd


@dataclass(frozen=True)
class NormalizedGoodputs:
    """Per-link channel shares; ``None`` where the scenario has no such link."""

    total: Fraction
    hd_downlink: Fraction | None
    fd_duplex: Fraction | None
    hd_uplink: Fraction | None


def normalized_goodputs(pop: Population, scenario: Scenario) -> NormalizedGoodputs:
    n = Fraction(pop.n)
    if scenario is Scenario.HD_ONLY:
        if pop.n_fd != 0:
            raise ValueError("HD_ONLY requires n_fd == 0")
        return NormalizedGoodputs(
            total=Fraction(1),
            hd_downlink=Fraction(1, pop.n * (pop.n + 1)),
            fd_duplex=None,
            hd_uplink=Fraction(1, pop.n + 1),
        )
    if scenario is Scenario.FD_ONLY:
        if pop.n_hd != 0:
            raise ValueError("FD_ONLY requires n_hd == 0")
        return NormalizedGoodputs(
            total=Fraction(2),
            hd_downlink=None,
            fd_duplex=Fraction(1, pop.n),
            hd_uplink=None,
        )
    if scenario is Scenario.MIXED_CASE1:
        if pop.n_fd != pop.n_hd or pop.n_fd < 1:
            raise ValueError("MIXED_CASE1 requires n_fd == n_hd >= 1")
        m = pop.n_fd
        return NormalizedGoodputs(
            total=1 + Fraction(m, pop.n + 1),
            hd_downlink=Fraction(1, m * (pop.n + 1)),
            fd_duplex=Fraction(1, pop.n + 1),
            hd_uplink=Fraction(1, pop.n + 1),
        )
    raise ValueError(f"unknown scenario {scenario}")


def improvement_factors(n: int) -> dict[str, Fraction]:
    """Per-link gains of an all-FD system over an all-HD system with n stations."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return {
        "uplink_gain": Fraction(n + 1, n),
        "downlink_gain": Fraction(n + 1),
        "sum_gain": Fraction(2),
    }
