import math

import numpy as np
import pytest

from blockrip.distributions import DistributionSpec
from blockrip.errors import CapacityError
from blockrip.group_model import GroupPartition
from blockrip.matrices import BlockDiagonalMatrix, OrthogonalBasis, haar_orthogonal, random_block_diagonal
from blockrip.rip import (RECOVERY_THRESHOLD, exact_group_ric, mc_group_ric_lower, phase_transition, recovery_gate,
                          ric_of_matrix, sensing_matrix)
from blockrip.rng import RngStream

from conftest import brute_group_ric

DIAG = BlockDiagonalMatrix.from_blocks([[[1.0]], [[1.1]]])
SINGLE2 = GroupPartition.contiguous(2, 1)


def test_diag_fixture_exact():
    est = exact_group_ric(DIAG, None, SINGLE2, 1)
    assert est.delta == pytest.approx(0.21, abs=1e-10)
    assert est.worst_support == (1,)
    assert est.supports_checked == 2


def test_diag_fixture_mc():
    assert mc_group_ric_lower(DIAG, None, SINGLE2, 1, 50, RngStream(0)).delta == pytest.approx(0.21, abs=1e-12)


def isometric_instance(m, d, L, seed):
    """Blocks sqrt(m) * (first d columns of an m x m orthogonal matrix)."""
    rng = np.random.default_rng(seed)
    blocks = [np.linalg.qr(rng.standard_normal((m, m)))[0][:, :d] * math.sqrt(m) for _ in range(L)]
    return BlockDiagonalMatrix.from_blocks(blocks)


@pytest.mark.parametrize("s", [1, 2])
def test_isometric_instance_zero(s):
    B = isometric_instance(6, 4, 3, s)
    psi = haar_orthogonal(12, RngStream(1))
    part = GroupPartition.contiguous(12, 2)
    assert exact_group_ric(B, psi, part, s).delta <= 1e-10
    assert mc_group_ric_lower(B, psi, part, s, 1000, RngStream(2)).delta <= 1e-10


def test_exact_matches_jacobi_oracle():
    B = random_block_diagonal(DistributionSpec.rademacher(), 2, 8, 4, RngStream(3))
    part = GroupPartition.contiguous(8, 2)
    A = sensing_matrix(B)
    assert exact_group_ric(B, None, part, 2).delta == pytest.approx(brute_group_ric(A, part.groups, 2), abs=1e-10)
    assert exact_group_ric(B, None, part, 2, method="power").delta == pytest.approx(
        brute_group_ric(A, part.groups, 2), abs=1e-7)


def test_mc_never_exceeds_exact():
    part = GroupPartition.contiguous(8, 2)
    for k in range(20):
        B = random_block_diagonal(DistributionSpec.gaussian(1.0), 2, 8, 4, RngStream(100, k))
        ex = exact_group_ric(B, None, part, 2).delta
        mc = mc_group_ric_lower(B, None, part, 2, 2000, RngStream(200, k)).delta
        assert mc <= ex + 1e-10


def test_delta_monotone_in_s():
    part = GroupPartition.contiguous(12, 2)
    B = random_block_diagonal(DistributionSpec.gaussian(1.0), 3, 5, 4, RngStream(4))
    deltas = [exact_group_ric(B, None, part, s).delta for s in (1, 2, 3)]
    assert deltas == sorted(deltas)


def test_scaling_by_constant():
    part = GroupPartition.contiguous(8, 2)
    B = random_block_diagonal(DistributionSpec.gaussian(1.0), 2, 6, 4, RngStream(5))
    base = exact_group_ric(B, None, part, 2)
    c = 1.3
    scaled = exact_group_ric(B.scaled(c), None, part, 2).delta
    A = sensing_matrix(B.scaled(c))
    assert scaled == pytest.approx(brute_group_ric(A, part.groups, 2), abs=1e-10)
    lam_max = 1 + base.delta_upper
    lam_min = 1 - base.delta_lower
    assert scaled == pytest.approx(max(c * c * lam_max - 1, 1 - c * c * lam_min), abs=1e-10)


def test_expected_energy_is_preserved():
    x = np.random.default_rng(0).standard_normal(8)
    x /= np.linalg.norm(x)
    vals = []
    for k in range(4000):
        B = random_block_diagonal(DistributionSpec.rademacher(), 2, 3, 4, RngStream(9, k))
        vals.append(np.sum((sensing_matrix(B) @ x) ** 2))
    vals = np.array(vals)
    assert abs(vals.mean() - 1) < 3 * vals.std() / math.sqrt(vals.size)


def test_capacity_error():
    part = GroupPartition.contiguous(100, 1)
    B = random_block_diagonal(DistributionSpec.gaussian(1.0), 1, 4, 100, RngStream(1))
    with pytest.raises(CapacityError):
        exact_group_ric(B, None, part, 5)


def test_gram_size_guard():
    part = GroupPartition(((tuple(range(600))),))
    with pytest.raises(CapacityError):
        ric_of_matrix(np.zeros((2, 600)), part, 1)


@pytest.mark.parametrize("delta,expected", [(0.0, True), (0.5, False), (0.41421356, True),
                                            (RECOVERY_THRESHOLD, False)])
def test_recovery_gate(delta, expected):
    assert recovery_gate(delta) is expected


def test_recovery_gate_boundary_literal():
    # sqrt(2) - 1 = 0.414213562..., so the 8-digit literal sits just below it
    assert RECOVERY_THRESHOLD > 0.41421356
    assert recovery_gate(0.4142135624) is False


def test_phase_transition_limits():
    part = GroupPartition.contiguous(16, 2)
    cells = phase_transition(DistributionSpec.gaussian(1.0), "identity", part, [1], [1, 1024], 4, 4, 0.3, 20,
                             RngStream(6))
    low, high = cells
    assert low.prob == 0.0
    assert high.mean_delta < 0.15 and high.prob >= 0.95


def test_phase_transition_capacity_note():
    part = GroupPartition.contiguous(64, 1)
    cells = phase_transition(DistributionSpec.gaussian(1.0), "identity", part, [6], [4], 16, 4, 0.3, 2,
                             RngStream(1), cap=1000)
    assert "capacity" in cells[0].note and math.isnan(cells[0].prob)
    auto = phase_transition(DistributionSpec.gaussian(1.0), "identity", part, [6], [4], 16, 4, 0.3, 2,
                            RngStream(1), ric_mode="auto", mc_trials=200, cap=1000)
    assert auto[0].mode == "mc" and not auto[0].note


def test_phase_transition_deterministic():
    part = GroupPartition.contiguous(8, 2)
    run = lambda: phase_transition(DistributionSpec.gaussian(1.0), "haar", part, [1, 2], [4, 8], 4, 2, 0.5, 5,  # noqa: E731
                                   RngStream(3))
    a, b = run(), run()
    assert all(np.array_equal(x.deltas, y.deltas) for x, y in zip(a, b))
