"""Stochastic discrete-time SIR transition kernel.

One day's update moves drift quantities between compartments and adds
truncated-normal perturbations:

    newInf = exp(lam * a) * beta * S * I / N        (new infections drift)
    newRec = gamma * I                              (new recoveries drift)
    S' = S - newInf - eps1
    I' = I + newInf - newRec + eps1 - eps2
    R' = R + newRec + eps2

eps1 ~ N(0, overdispersion * newInf) truncated to [-newInf, S - newInf], so
total new infections (newInf + eps1) land in [0, S].  eps2 ~ N(0,
overdispersion * newRec) truncated to [-newRec, I + newInf + eps1 - newRec],
so total recoveries land in [0, infected pool after today's infections].
The second upper bound is slightly tighter than the "compartments stay below
N" requirement alone would demand; the looser bound N - R - newRec admits
recovery flows that exceed the infected pool and drive I below zero, which
would poison the next step's variance.  Bounding recoveries by the infected
pool is the minimal restriction that keeps every compartment nonnegative by
construction (and it implies R' <= N).

Treatment timing: a_t acts on the transition that produces the state at t,
i.e. the step from t-1 to t applies exp(lam * a_t).

Compartments are real-valued: the noise is continuous, so no rounding is
applied anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .noise import NoiseSpec, sample_truncated_normal, truncated_normal_transform
from .streams import RandomStream


@dataclass(frozen=True)
class SirParams:
    """Parameters of the epidemic process.

    population: closed population size N.
    initial_infected: I at t=0 (S starts at N - I0, R at 0).
    beta: daily contact rate.
    gamma: daily recovery rate.
    lam: log-scale intervention strength; treatment a multiplies the contact
        rate by exp(lam * a), so lam < 0 attenuates transmission.
    overdispersion: variance of each noise term per unit of drift.
    horizon: number of simulated days T.
    """

    population: float = 1_000_000.0
    initial_infected: float = 200.0
    beta: float = 2.0 / 7.0
    gamma: float = 1.0 / 7.0
    lam: float = -0.2
    overdispersion: float = 500.0
    horizon: int = 100

    def __post_init__(self):
        if not self.population > 0:
            raise ValueError(f"population must be > 0, got {self.population!r}")
        if not 0 < self.initial_infected < self.population:
            raise ValueError(
                f"initial_infected must be in (0, population), got {self.initial_infected!r}"
            )
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta!r}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma!r}")
        if self.overdispersion < 0:
            raise ValueError(f"overdispersion must be >= 0, got {self.overdispersion!r}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon!r}")

    @property
    def initial_outcome(self) -> float:
        """y_0 = 1 - S_0/N, the infected share before any step runs."""
        return self.initial_infected / self.population


@dataclass(frozen=True)
class CompartmentState:
    """Susceptible / infected / recovered occupancy at one time step."""

    s: float
    i: float
    r: float

    @classmethod
    def initial(cls, params: SirParams) -> "CompartmentState":
        return cls(params.population - params.initial_infected, params.initial_infected, 0.0)

    @property
    def total(self) -> float:
        return self.s + self.i + self.r

    def outcome(self, population: float) -> float:
        """Cumulative infection share 1 - S/N."""
        return 1.0 - self.s / population


@dataclass(frozen=True)
class Trajectory:
    """One simulated epidemic: states at t = 0..T, treatments and outcomes at t = 1..T.

    outcomes[t-1] = 1 - S_t/N; the sequence is nondecreasing because S never
    grows.  treatments[t-1] is the value applied on the step into state t.
    """

    states: tuple[CompartmentState, ...]
    treatments: tuple[int, ...]
    outcomes: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if len(self.states) != len(self.treatments) + 1:
            raise ValueError(
                f"states must have one more entry than treatments: "
                f"{len(self.states)} states vs {len(self.treatments)} treatments"
            )
        if len(self.outcomes) != len(self.treatments):
            raise ValueError(
                f"outcomes and treatments must have equal length: "
                f"{len(self.outcomes)} vs {len(self.treatments)}"
            )

    @property
    def horizon(self) -> int:
        return len(self.treatments)

    @property
    def final_outcome(self) -> float:
        return self.outcomes[-1]


def sir_step_arrays(s, i, r, params: SirParams, a, u1, u2):
    """Vectorized one-day update over arrays of independent replicates.

    `u1`, `u2` are the step's pre-drawn uniforms for the infection and
    recovery noise respectively.  Returns the new (s, i, r) arrays.
    """
    scale = np.exp(params.lam * np.asarray(a, dtype=np.float64))
    new_inf = scale * params.beta * s * i / params.population
    new_rec = params.gamma * i

    eps1 = truncated_normal_transform(
        0.0, params.overdispersion * new_inf, -new_inf, s - new_inf, u1
    )
    infected_pool = i + new_inf + eps1
    eps2 = truncated_normal_transform(
        0.0, params.overdispersion * new_rec, -new_rec, infected_pool - new_rec, u2
    )

    s_next = np.maximum(s - new_inf - eps1, 0.0)
    i_next = np.maximum(infected_pool - new_rec - eps2, 0.0)
    r_next = r + new_rec + eps2
    return s_next, i_next, r_next


def sir_step(
    state: CompartmentState, params: SirParams, a_t: int, rng: RandomStream
) -> CompartmentState:
    """One day of epidemic dynamics for a single replicate.

    Consumes exactly two uniforms from `rng` (infection noise, then recovery
    noise) even when a drift term is zero, so scalar and array simulations of
    the same stream stay aligned.
    """
    if a_t not in (0, 1):
        raise ValueError(f"treatment must be 0 or 1, got {a_t!r}")
    new_inf = math.exp(params.lam * a_t) * params.beta * state.s * state.i / params.population
    new_rec = params.gamma * state.i

    eps1 = sample_truncated_normal(
        NoiseSpec(0.0, params.overdispersion * new_inf, -new_inf, state.s - new_inf), rng
    )
    infected_pool = state.i + new_inf + eps1
    eps2 = sample_truncated_normal(
        NoiseSpec(0.0, params.overdispersion * new_rec, -new_rec, infected_pool - new_rec), rng
    )
    return CompartmentState(
        s=max(state.s - new_inf - eps1, 0.0),
        i=max(infected_pool - new_rec - eps2, 0.0),
        r=state.r + new_rec + eps2,
    )


def simulate_trajectory(params: SirParams, rule, rng: RandomStream) -> Trajectory:
    """Run one full trajectory under a decision rule.

    `rule` is a policy object (see `policies.PolicyRule`); at each step it
    sees the history up to and including the latest outcome and returns the
    next treatment.  The stream interleaves policy draws (for random rules)
    with the two noise draws per day.
    """
    from .policies import ObservedHistory  # local import to avoid a cycle

    state = CompartmentState.initial(params)
    states = [state]
    treatments: list[int] = []
    outcomes: list[float] = [params.initial_outcome]

    for _ in range(params.horizon):
        history = ObservedHistory(tuple(treatments), tuple(outcomes))
        a_t = int(rule.decide(history, rng))
        state = sir_step(state, params, a_t, rng)
        treatments.append(a_t)
        outcomes.append(state.outcome(params.population))
        states.append(state)

    return Trajectory(tuple(states), tuple(treatments), tuple(outcomes[1:]))
