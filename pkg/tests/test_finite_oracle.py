"""Exact finite-alphabet oracle vs. an independent brute-force enumeration.

The reference implementations below use nothing from the module under test
except the kernel tables themselves: they walk every (treatment, outcome)
path with itertools and accumulate joint probabilities directly.  Any
disagreement at 1e-12 is a bug on one side or the other.
"""

from itertools import product

import numpy as np
import pytest

from epibias.errors import (
    InstanceTooLargeError,
    KernelValidationError,
    UndefinedConditionalError,
    UndefinedRatioError,
)
from epibias.finite import (
    FiniteDgp,
    adaptive_ratio,
    associational_exact,
    classify_adaptations,
    coin_epidemic,
    enumerate_paths,
    exogenous_null,
    g_formula_exact,
    moving_marginal_expectation,
    prospective_propensity,
    random_dgp,
    reversed_coin_epidemic,
)


# ---------------------------------------------------------------------------
# Independent reference implementations
# ---------------------------------------------------------------------------

def brute_force_joint(dgp):
    """Yield (a_indices, y_indices_with_y0, probability) for every path."""
    T = dgp.horizon
    n_a = len(dgp.treatment_values)
    n_y = len(dgp.outcome_values)
    y0 = dgp.initial_outcome_index
    for a_path in product(range(n_a), repeat=T):
        for y_tail in product(range(n_y), repeat=T):
            ys = (y0,) + y_tail
            prob = 1.0
            for t in range(T):
                prob *= dgp.rule_row(t, a_path[:t], ys[: t + 1])[a_path[t]]
                prob *= dgp.outcome_row(t + 1, a_path[: t + 1], ys[: t + 1])[y_tail[t]]
            yield a_path, ys, prob


def brute_force_g(dgp, target):
    """Mean final outcome with treatments forced: only outcome kernels count."""
    T = dgp.horizon
    a_path = tuple(dgp.treatment_index(a) for a in target)
    total = 0.0
    y0 = dgp.initial_outcome_index
    for y_tail in product(range(len(dgp.outcome_values)), repeat=T):
        ys = (y0,) + y_tail
        prob = 1.0
        for t in range(T):
            prob *= dgp.outcome_row(t + 1, a_path[: t + 1], ys[: t + 1])[y_tail[t]]
        total += prob * dgp.outcome_values[y_tail[-1]]
    return total


def brute_force_assoc(dgp, target):
    """Mean final outcome among joint paths whose treatments equal target."""
    a_target = tuple(dgp.treatment_index(a) for a in target)
    num = den = 0.0
    for a_path, ys, prob in brute_force_joint(dgp):
        if a_path == a_target:
            num += prob * dgp.outcome_values[ys[-1]]
            den += prob
    return num / den


# ---------------------------------------------------------------------------
# The worked two-period example
# ---------------------------------------------------------------------------

class TestCoinEpidemic:
    def test_path_enumeration(self):
        paths = enumerate_paths(coin_epidemic())
        assert len(paths) == 6
        assert sum(p.probability for p in paths) == pytest.approx(1.0, abs=1e-12)
        # Paths carry values, not indices, and include y_0.
        for p in paths:
            assert len(p.treatments) == 2
            assert len(p.outcomes) == 3
            assert p.outcomes[0] == 0.0
            assert p.probability > 0.0

    def test_g_formula_value(self):
        assert g_formula_exact(coin_epidemic(), (0, 0)) == pytest.approx(1.1, abs=1e-12)

    def test_associational_value(self):
        assert associational_exact(coin_epidemic(), (0, 0)) == pytest.approx(0.6, abs=1e-12)

    def test_bias_against_brute_force(self):
        dgp = coin_epidemic()
        g = g_formula_exact(dgp, (0, 0))
        assoc = associational_exact(dgp, (0, 0))
        assert g == pytest.approx(brute_force_g(dgp, (0, 0)), abs=1e-12)
        assert assoc == pytest.approx(brute_force_assoc(dgp, (0, 0)), abs=1e-12)
        assert assoc - g == pytest.approx(-0.5, abs=1e-12)

    def test_propensities(self):
        dgp = coin_epidemic()
        # After seeing y_1 = 0 the rule continues with 0.8; marginalizing
        # y_1 out gives 0.4.
        lag0 = prospective_propensity(dgp, 1, 0, (0,), (0,), (0.0, 0.0))
        lag1 = prospective_propensity(dgp, 1, 1, (0,), (0,), (0.0,))
        assert lag0 == pytest.approx(0.8, abs=1e-12)
        assert lag1 == pytest.approx(0.4, abs=1e-12)

    def test_empty_future_has_probability_one(self):
        dgp = coin_epidemic()
        assert prospective_propensity(dgp, 2, 0, (), (0, 0), (0.0, 0.0, 1.0)) == 1.0

    def test_adaptive_ratios(self):
        dgp = coin_epidemic()
        assert adaptive_ratio(dgp, 1, (0,), (0,), (0.0,), 0.0) == pytest.approx(2.0, abs=1e-12)
        assert adaptive_ratio(dgp, 1, (0,), (0,), (0.0,), 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_adaptation_partition(self):
        dgp = coin_epidemic()
        part = classify_adaptations(dgp, 1, (0,), (0,), (0.0,))
        assert part.upweighted == frozenset({0.0})
        assert part.downweighted == frozenset({1.0})
        assert part.neutral == frozenset()
        assert part.nonconstant

    def test_moving_marginal_expectations(self):
        dgp = coin_epidemic()
        f0 = moving_marginal_expectation(dgp, 1, 0.0, (0,), (0,), (0.0,))
        f1 = moving_marginal_expectation(dgp, 1, 1.0, (0,), (0,), (0.0,))
        assert f0 == pytest.approx(0.6, abs=1e-12)
        assert f1 == pytest.approx(1.6, abs=1e-12)


# ---------------------------------------------------------------------------
# Structural edge cases
# ---------------------------------------------------------------------------

def uniform_dgp(horizon=1, n_y=2, n_a=2):
    return FiniteDgp.from_functions(
        horizon,
        tuple(float(k) for k in range(n_y)),
        tuple(range(n_a)),
        0,
        lambda t, a, y: (1.0 / n_y,) * n_y,
        lambda t, a, y: (1.0 / n_a,) * n_a,
    )


def test_single_period_uniform_paths():
    paths = enumerate_paths(uniform_dgp())
    assert len(paths) == 4
    for p in paths:
        assert p.probability == pytest.approx(0.25, abs=1e-15)


def test_single_period_g_formula_is_one_step_mean():
    dgp = uniform_dgp()
    assert g_formula_exact(dgp, (0,)) == pytest.approx(0.5, abs=1e-15)


def test_zero_probability_rule_rows_prune_paths():
    # Rule always picks treatment 0: no path with treatment 1 appears.
    dgp = FiniteDgp.from_functions(
        2, (0.0, 1.0), (0, 1), 0,
        lambda t, a, y: (0.5, 0.5),
        lambda t, a, y: (1.0, 0.0),
    )
    paths = enumerate_paths(dgp)
    assert all(p.treatments == (0, 0) for p in paths)
    assert sum(p.probability for p in paths) == pytest.approx(1.0, abs=1e-12)


def test_treatment_independent_kernels_make_g_constant():
    rng = np.random.default_rng(5)
    rows = {}

    def outcome_fn(t, a, y):
        key = (t, y)
        if key not in rows:
            probs = rng.dirichlet((1.0, 1.0, 1.0))
            rows[key] = tuple(probs)
        return rows[key]

    dgp = FiniteDgp.from_functions(
        2, (0.0, 0.5, 1.0), (0, 1), 0, outcome_fn, lambda t, a, y: (0.5, 0.5)
    )
    values = {
        g_formula_exact(dgp, target)
        for target in product((0, 1), repeat=2)
    }
    assert max(values) - min(values) < 1e-12


def test_exogenous_rule_means_no_confounding():
    dgp = exogenous_null()
    for target in ((0, 0), (0, 1), (1, 0), (1, 1)):
        g = g_formula_exact(dgp, target)
        assoc = associational_exact(dgp, target)
        assert assoc == pytest.approx(g, abs=1e-12)


def test_unreachable_conditioning_raises(tmp_path):
    dgp = FiniteDgp.from_functions(
        1, (0.0, 1.0), (0, 1), 0,
        lambda t, a, y: (0.5, 0.5),
        lambda t, a, y: (1.0, 0.0),
    )
    with pytest.raises(UndefinedConditionalError):
        associational_exact(dgp, (1,))


def test_propensity_history_must_be_reachable():
    dgp = coin_epidemic()
    # y_0 must equal the initial value; anything else has probability zero.
    with pytest.raises(UndefinedConditionalError):
        prospective_propensity(dgp, 1, 0, (0,), (0,), (1.0, 0.0))


def test_propensity_validates_lengths():
    dgp = coin_epidemic()
    with pytest.raises(ValueError):
        prospective_propensity(dgp, 1, 0, (0,), (0,), (0.0,))  # lag-0 needs y_0..y_1
    with pytest.raises(ValueError):
        prospective_propensity(dgp, 1, 2, (0,), (0,), (0.0,))  # lag must be 0 or 1


def test_ratio_undefined_when_denominator_vanishes():
    # Rule that never continues regardless of history: lag-1 propensity of
    # the continuing path is zero.
    dgp = coin_epidemic().with_rule(lambda t, a, y: (0.0, 1.0))
    with pytest.raises(UndefinedRatioError):
        adaptive_ratio(dgp, 1, (0,), (1,), (0.0,), 0.0)


def test_moving_marginal_constant_outcome():
    dgp = FiniteDgp.from_functions(
        2, (0.0, 0.7), (0, 1), 0,
        lambda t, a, y: (0.0, 1.0),  # always jumps to 0.7
        lambda t, a, y: (0.5, 0.5),
    )
    f = moving_marginal_expectation(dgp, 1, 0.7, (0,), (0,), (0.0,))
    assert f == pytest.approx(0.7, abs=1e-12)


def test_moving_marginal_at_last_step_is_one_step_expectation():
    dgp = coin_epidemic()
    f = moving_marginal_expectation(dgp, 1, 1.0, (0,), (0,), (0.0,))
    row = dgp.outcome_row(2, (0, 0), (0, 1))
    direct = sum(p * v for p, v in zip(row, dgp.outcome_values))
    assert f == pytest.approx(direct, abs=1e-12)


# ---------------------------------------------------------------------------
# Validation and serialization
# ---------------------------------------------------------------------------

class TestValidation:
    def test_row_sum_checked(self):
        with pytest.raises(KernelValidationError):
            FiniteDgp.from_functions(
                1, (0.0, 1.0), (0, 1), 0,
                lambda t, a, y: (0.6, 0.6),
                lambda t, a, y: (0.5, 0.5),
            )

    def test_negative_entries_checked(self):
        with pytest.raises(KernelValidationError):
            FiniteDgp.from_functions(
                1, (0.0, 1.0), (0, 1), 0,
                lambda t, a, y: (1.5, -0.5),
                lambda t, a, y: (0.5, 0.5),
            )

    def test_outcome_values_must_increase(self):
        with pytest.raises(KernelValidationError):
            FiniteDgp.from_functions(
                1, (1.0, 0.0), (0, 1), 0,
                lambda t, a, y: (0.5, 0.5),
                lambda t, a, y: (0.5, 0.5),
            )

    def test_path_cap_enforced(self):
        with pytest.raises(InstanceTooLargeError):
            uniform_dgp(horizon=13, n_y=2, n_a=2)  # 4^13 > 10^7

    def test_missing_table_detected(self):
        dgp = coin_epidemic()
        broken = dict(dgp.outcome_kernels)
        del broken[2]
        with pytest.raises(KernelValidationError):
            FiniteDgp(
                dgp.horizon,
                dgp.outcome_values,
                dgp.treatment_values,
                dgp.initial_outcome_index,
                broken,
                dgp.rule_kernels,
            )


def test_dict_round_trip():
    dgp = coin_epidemic()
    clone = FiniteDgp.from_dict(dgp.to_dict())
    assert clone == dgp
    assert g_formula_exact(clone, (0, 0)) == g_formula_exact(dgp, (0, 0))


def test_reversed_instance_flips_the_bias_sign():
    dgp = reversed_coin_epidemic()
    bias = associational_exact(dgp, (0, 0)) - g_formula_exact(dgp, (0, 0))
    assert bias == pytest.approx(0.5, abs=1e-12)


# ---------------------------------------------------------------------------
# Randomized cross-checks against the brute-force route
# ---------------------------------------------------------------------------

def test_random_instances_match_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(12):
        dgp = random_dgp(rng)
        target = tuple(
            int(rng.choice(dgp.treatment_values)) for _ in range(dgp.horizon)
        )
        assert g_formula_exact(dgp, target) == pytest.approx(
            brute_force_g(dgp, target), abs=1e-12
        )
        joint_mass = sum(
            prob
            for a_path, _, prob in brute_force_joint(dgp)
            if a_path == tuple(dgp.treatment_index(a) for a in target)
        )
        if joint_mass > 1e-9:
            assert associational_exact(dgp, target) == pytest.approx(
                brute_force_assoc(dgp, target), abs=1e-12
            )


def test_enumerated_paths_match_brute_force_probabilities():
    rng = np.random.default_rng(77)
    dgp = random_dgp(rng)
    enumerated = {
        (p.treatments, p.outcomes): p.probability for p in enumerate_paths(dgp)
    }
    for a_path, ys, prob in brute_force_joint(dgp):
        key = (
            tuple(dgp.treatment_values[a] for a in a_path),
            tuple(dgp.outcome_values[y] for y in ys),
        )
        if prob > 0.0:
            assert enumerated[key] == pytest.approx(prob, abs=1e-12)
        else:
            assert key not in enumerated
