import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blockrip.errors import CapacityError, ParameterDomainError, ValidationError
from blockrip.group_model import (GroupPartition, best_group_approx, coherence_mu, count_group_supports,
                                  enumerate_group_supports, group_l0, group_norms, mixed_norm)
from blockrip.matrices import haar_orthogonal
from blockrip.rng import RngStream

PAIRS = GroupPartition.contiguous(4, 2)


def test_partition_properties():
    part = GroupPartition(((0, 3), (1,), (2, 4)))
    assert (part.D, part.G, part.sizes, part.g) == (5, 3, (2, 1, 2), 2)
    assert list(part.labels) == [0, 1, 2, 0, 2]


def test_partition_overlap_message():
    with pytest.raises(ValidationError, match="partition: overlap at index 2"):
        GroupPartition.from_config([[1, 2], [2, 3]])


def test_partition_gap_message():
    with pytest.raises(ValidationError, match="not covered"):
        GroupPartition(((0,), (2,)))


def test_partition_config_roundtrip():
    part = GroupPartition.from_config([[1, 4], [2, 3]], D=4)
    assert part.to_config() == [[1, 4], [2, 3]]
    with pytest.raises(ValidationError):
        GroupPartition.from_config([[1, 2]], D=3)


@pytest.mark.parametrize("x,p,expected", [((3, 4, 0, 0), 2, 5), ((3, 4, 0, 0), 1, 5), ((3, 4, 0, 0), math.inf, 5),
                                          ((1, 0, 1, 0), 1, 2), ((1, 0, 1, 0), math.inf, 1)])
def test_mixed_norm_examples(x, p, expected):
    assert mixed_norm(np.array(x, float), PAIRS, p) == pytest.approx(expected)


def test_mixed_norm_domain():
    with pytest.raises(ParameterDomainError):
        mixed_norm(np.ones(4), PAIRS, 0.5)


PART6 = GroupPartition(((0, 5), (1, 2), (3,), (4,)))
vec6 = arrays(np.float64, 6, elements=st.floats(-100, 100))


@settings(max_examples=200, deadline=None)
@given(vec6, vec6, st.floats(-5, 5), st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]))
def test_mixed_norm_is_a_norm(x, y, c, p):
    assert mixed_norm(x + y, PART6, p) <= mixed_norm(x, PART6, p) + mixed_norm(y, PART6, p) + 1e-10
    assert mixed_norm(c * x, PART6, p) == pytest.approx(abs(c) * mixed_norm(x, PART6, p), rel=1e-12, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(vec6)
def test_mixed_norm_ordering(x):
    ninf, n2, n1 = (mixed_norm(x, PART6, p) for p in (math.inf, 2, 1))
    assert ninf <= n2 * (1 + 1e-12) + 1e-12 and n2 <= n1 * (1 + 1e-12) + 1e-12
    assert n2 == pytest.approx(np.linalg.norm(x), rel=1e-12, abs=1e-12)


def test_group_l0_examples():
    assert group_l0(np.zeros(4), PAIRS) == 0
    assert group_l0(np.array([3.0, 4, 0, 0]), PAIRS) == 1
    assert group_l0(np.ones(4), PAIRS) == 2
    with pytest.raises(ParameterDomainError):
        group_l0(np.ones(4), PAIRS, -1.0)


def test_best_group_approx_example():
    part = GroupPartition.contiguous(6, 2)
    z, err = best_group_approx(np.array([1.0, 0, 2, 0, 3, 0]), part, 1)
    assert z.active_groups == (2,)
    assert err == pytest.approx(3.0)
    assert best_group_approx(np.arange(6.0), part, 3)[1] == 0.0


def test_best_group_approx_ties_prefer_low_index():
    z, _ = best_group_approx(np.ones(4), PAIRS, 1)
    assert z.active_groups == (0,)


def test_best_group_approx_vs_exhaustive(rng):
    part = GroupPartition.contiguous(12, 2)
    for _ in range(20):
        x = rng.standard_normal(12)
        norms = group_norms(x, part)
        prev = math.inf
        for s in range(0, 4):
            brute = min(norms.sum() - norms[list(T)].sum() for T in itertools.combinations(range(6), s))
            err = best_group_approx(x, part, s)[1]
            assert err == pytest.approx(brute, abs=1e-12)
            assert err <= prev
            prev = err


def test_coherence_identity_and_hadamard():
    assert coherence_mu(np.eye(8), GroupPartition.contiguous(8, 2), 4) == 1.0
    H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]) / 2
    assert coherence_mu(H, GroupPartition.contiguous(4, 1), 4) == pytest.approx(1.0)


def test_coherence_haar_direct():
    psi = haar_orthogonal(32, RngStream(4))
    part = GroupPartition.contiguous(32, 4)
    P = psi.matrix
    direct = min(2.0 * max(max(np.linalg.norm(P[i, g * 4:(g + 1) * 4]) for g in range(8)) for i in range(32)), 1.0)
    mu = coherence_mu(psi, part, 4)
    assert 0 < mu <= 1
    assert mu == pytest.approx(direct, rel=1e-14)


def test_enumerate_supports():
    assert list(enumerate_group_supports(3, 1)) == [(0,), (1,), (2,)]
    assert len(list(enumerate_group_supports(3, 3))) == 7
    assert count_group_supports(10, 3) == 175
    sup = list(enumerate_group_supports(10, 3))
    assert len(sup) == len(set(sup)) == 175


def test_enumerate_supports_guard():
    with pytest.raises(CapacityError):
        enumerate_group_supports(100, 5)
