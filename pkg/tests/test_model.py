import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tandemflex as tf
from tandemflex.model import IDLE, STATION1, WORK


def test_validate_accepts_published_counterexample_instance():
    p = tf.validate(tf.EXAMPLE1)
    assert p.rate_sum == pytest.approx(17.46)
    assert p.full_collaboration == (False, False)


def test_validate_rejects_superadditive_collaboration():
    with pytest.raises(tf.CollaborationBoundViolated):
        tf.validate(tf.SystemParams(nu1=1, nu2=1, mu1=1, mu2=1, xi1=2, xi2=0.5, h1=1, h2=1))


def test_validate_rejects_collaboration_without_partner():
    with pytest.raises(tf.OrphanCollaboration):
        tf.validate(tf.SystemParams(nu1=0, nu2=1, mu1=1, mu2=1, xi1=0.1, xi2=0.5, h1=1, h2=1))


def test_validate_rejects_collaboration_slower_than_flex_alone():
    # nu + xi <= mu means the pair would never be worth forming
    with pytest.raises(tf.CollaborationBoundViolated):
        tf.validate(tf.SystemParams(nu1=0.1, nu2=1, mu1=1, mu2=1, xi1=0.5, xi2=0.5, h1=1, h2=1))


def test_validate_rejects_nonpositive_rates_and_costs():
    with pytest.raises(tf.NonPositiveRate):
        tf.validate(tf.SystemParams(nu1=1, nu2=1, mu1=0, mu2=1, xi1=0.5, xi2=0.5, h1=1, h2=1))
    with pytest.raises(tf.NonPositiveRate):
        tf.validate(tf.SystemParams(nu1=1, nu2=1, mu1=1, mu2=1, xi1=0.5, xi2=0.5, h1=1, h2=-2))
    with pytest.raises(tf.NonPositiveRate):
        tf.validate({"nu1": 1, "nu2": 1, "mu1": 1, "mu2": 1, "xi1": 0.5, "xi2": 0.5, "h1": 1})


def test_full_collaboration_flag():
    p = tf.validate(tf.SystemParams(nu1=1, nu2=1, mu1=0.5, mu2=0.5, xi1=0.5, xi2=0.2, h1=1, h2=1))
    assert p.full_collaboration == (True, False)


def test_uniformize_normalizes_and_records_scale():
    p = tf.uniformize(tf.validate(tf.EXAMPLE1))
    assert p.uniformization_scale == pytest.approx(17.46)
    assert abs(p.rate_sum - 1.0) <= 1e-15
    assert p.h1 == tf.EXAMPLE1.h1 and p.h2 == tf.EXAMPLE1.h2


def test_uniformize_identity_on_normalized_rates():
    p = tf.SystemParams(nu1=0.25, nu2=0.25, mu1=0.15, mu2=0.15, xi1=0.1, xi2=0.1, h1=1, h2=1)
    q = tf.uniformize(p)
    assert q.uniformization_scale == 1.0
    assert q.nu1 == p.nu1 and q.xi2 == p.xi2


def test_uniformize_halves_rates_summing_to_two():
    p = tf.SystemParams(nu1=0.5, nu2=0.5, mu1=0.3, mu2=0.3, xi1=0.2, xi2=0.2, h1=1, h2=1)
    q = tf.uniformize(p)
    assert q.uniformization_scale == pytest.approx(2.0)
    assert q.nu1 == pytest.approx(0.25)


def test_feasible_allocations_one_upstream_job():
    p = tf.validate(tf.SystemParams(nu1=1.0, nu2=1.0, mu1=0.6, mu2=0.6, xi1=0.4, xi2=0.4,
                                    h1=1, h2=1))
    allocs = tf.feasible_allocations(tf.State(1, 0), p)
    rates = {a.rho1 for a in allocs}
    assert rates == {p.nu1 + p.xi1, p.nu1, p.mu1}
    assert all(a.rho2 == 0 for a in allocs)
    shared = [a for a in allocs if a.rho1 == p.nu1 + p.xi1]
    assert shared[0].collab1  # a single job forces the servers together


def test_feasible_allocations_two_downstream_jobs():
    p = tf.validate(tf.SystemParams(nu1=1.0, nu2=1.0, mu1=0.6, mu2=0.6, xi1=0.4, xi2=0.4,
                                    h1=1, h2=1))
    allocs = tf.feasible_allocations(tf.State(0, 2), p)
    assert {(a.rho1, a.rho2) for a in allocs} == {
        (0.0, p.nu2 + p.mu2), (0.0, p.nu2 + p.xi2), (0.0, p.nu2), (0.0, p.mu2)}


def test_feasible_allocations_degenerate_station1():
    p = tf.validate(tf.SystemParams(nu1=0.0, nu2=1.0, mu1=0.6, mu2=0.6, xi1=0.0, xi2=0.4,
                                    h1=1, h2=1))
    allocs = tf.feasible_allocations(tf.State(2, 2), p)
    pairs = {(a.rho1, a.rho2) for a in allocs}
    assert (p.mu1, p.nu2) in pairs
    assert (0.0, p.nu2 + p.mu2) in pairs
    assert all(a.d1 == IDLE for a in allocs)  # no dedicated server upstream


def test_feasible_allocations_empty_system():
    p = tf.validate(tf.SystemParams(nu1=1, nu2=1, mu1=0.5, mu2=0.5, xi1=0.3, xi2=0.3, h1=1, h2=1))
    with pytest.raises(tf.EmptySystem):
        tf.feasible_allocations(tf.State(0, 0), p)


def test_full_collaboration_deduplicates_to_separate_jobs():
    # xi == mu makes sharing and splitting the same rate; the separate-jobs
    # label must survive deduplication.
    p = tf.validate(tf.SystemParams(nu1=1, nu2=1, mu1=0.5, mu2=0.5, xi1=0.5, xi2=0.5, h1=1, h2=1))
    allocs = tf.feasible_allocations(tf.State(2, 0), p)
    both = [a for a in allocs if a.d1 == WORK and a.flex == STATION1]
    assert len(both) == 1 and not both[0].collab1


def test_state_rejects_negative_counts():
    with pytest.raises(ValueError):
        tf.State(-1, 0)


params_strategy = st.builds(
    tf.SystemParams,
    nu1=st.one_of(st.just(0.0), st.floats(0.05, 10)),
    nu2=st.one_of(st.just(0.0), st.floats(0.05, 10)),
    mu1=st.floats(0.05, 10),
    mu2=st.floats(0.05, 10),
    xi1=st.floats(0.0, 1.0),
    xi2=st.floats(0.0, 1.0),
    h1=st.floats(0.1, 20),
    h2=st.floats(0.1, 20),
)


def _constrain(params):
    """Rescale the xi draws (given as fractions of mu) into the valid band."""
    def fix(nu, mu, frac):
        if nu == 0:
            return 0.0
        lo = max(0.0, (mu - nu) / mu)
        u = lo + (1 - lo) * max(frac, 1e-3)
        return min(u * mu, mu)

    return tf.SystemParams(
        nu1=params.nu1, nu2=params.nu2, mu1=params.mu1, mu2=params.mu2,
        xi1=fix(params.nu1, params.mu1, params.xi1),
        xi2=fix(params.nu2, params.mu2, params.xi2),
        h1=params.h1, h2=params.h2)


@settings(max_examples=150, deadline=None)
@given(params=params_strategy,
       x1=st.integers(0, 4), x2=st.integers(0, 4))
def test_feasible_allocation_invariants(params, x1, x2):
    if x1 + x2 == 0:
        return
    try:
        p = tf.validate(_constrain(params))
    except tf.ValidationError:
        return
    allocs = tf.feasible_allocations(tf.State(x1, x2), p)
    assert allocs
    pairs = [(a.rho1, a.rho2) for a in allocs]
    assert len(set(pairs)) == len(pairs)
    cap1 = tf.model.max_rate(p.nu1, p.mu1, p.xi1, x1)
    cap2 = tf.model.max_rate(p.nu2, p.mu2, p.xi2, x2)
    for a in allocs:
        assert a.rho1 + a.rho2 > 0
        assert (a.rho1 == 0) if x1 == 0 else (a.rho1 <= p.nu1 + p.mu1 + 1e-15)
        assert (a.rho2 == 0) if x2 == 0 else (a.rho2 <= p.nu2 + p.mu2 + 1e-15)
        if x1 == 1:
            assert a.rho1 <= cap1
        if x2 == 1:
            assert a.rho2 <= cap2
    if x1 >= 1:
        assert math.isclose(max(a.rho1 for a in allocs), cap1)
    if x2 >= 1:
        assert math.isclose(max(a.rho2 for a in allocs), cap2)
