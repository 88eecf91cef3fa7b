"""Greedy interpolation of coefficient fields."""

import numpy as np
import pytest

from swellrom.errors import DimensionMismatch, ZeroTrainingSet
from swellrom.reduction_offline import eim_greedy, interpolation_weights


@pytest.fixture(scope="module")
def training():
    # smooth parametric family on a 1-d sample axis, two components
    rng = np.random.default_rng(5)
    s = np.linspace(0.0, 1.0, 60)
    rows = []
    for _ in range(25):
        a, b, c = rng.uniform(0.5, 2.0, 3)
        f0 = np.sin(a * np.pi * s) + b
        f1 = np.exp(-c * s)
        rows.append(np.column_stack([f0, f1]).reshape(-1))
    return np.asarray(rows)


@pytest.fixture(scope="module")
def eim(training):
    return eim_greedy(training.copy(), 2, 1e-10)


def test_collocation_unit_lower_triangular(eim):
    c = eim.collocation
    m = eim.n_modes
    assert np.array_equal(np.diag(c), np.ones(m))
    assert np.abs(np.triu(c, 1)).max() == 0.0
    # max-residual pivoting keeps every entry at most one in magnitude
    assert np.abs(c).max() <= 1.0 + 1e-14


def test_training_vectors_reconstructed(training, eim):
    flat = eim.pair_flat
    for row in training:
        w = interpolation_weights(eim, row[flat])
        err = np.abs(eim.basis @ w - row).max()
        assert err < 1e-10 * np.abs(row).max()


def test_error_history_shape_and_decay(eim):
    h = eim.error_history
    assert len(h) == eim.n_modes + 1
    assert h[0] == 1.0
    assert h[-1] < 1e-10
    assert h[:-1].min() >= 1e-10  # stopped at the first admissible count


def test_pairs_are_unique(eim):
    flat = eim.pair_flat
    assert len(np.unique(flat)) == len(flat)
    assert np.all(eim.pairs[:, 1] < eim.n_components)
    assert eim.pairs.dtype == np.int64


def test_recombination_reproduces_basis(training, eim):
    # weight magnitude grows like 1/pivot, so the identity defect
    # scales with it; assert against that scaled bound
    rebuilt = eim.recombination @ training
    scale = max(1.0, np.abs(eim.recombination).max()) * np.abs(training).max()
    assert np.abs(rebuilt.T - eim.basis).max() < 1e-13 * scale
    # at moderate tolerance the weights stay small and the identity is tight
    loose = eim_greedy(training.copy(), 2, 1e-4)
    assert np.abs((loose.recombination @ training).T - loose.basis).max() < 1e-11


def test_greedy_is_deterministic(training):
    a = eim_greedy(training.copy(), 2, 1e-8)
    b = eim_greedy(training.copy(), 2, 1e-8)
    assert np.array_equal(a.basis, b.basis)
    assert np.array_equal(a.pairs, b.pairs)
    assert np.array_equal(a.selected, b.selected)
    assert np.array_equal(a.error_history, b.error_history)


def test_duplicate_rows_tie_break_earliest():
    base = np.array([[0.0, 2.0, 1.0], [0.0, 2.0, 1.0], [1.0, 0.0, 0.0]])
    eim = eim_greedy(base.copy(), 1, 1e-14)
    # rows 0 and 1 tie at relative error 1; row 0 wins, then its twin
    # is interpolated exactly and row 2 follows
    assert eim.selected[0] == 0
    assert 1 not in eim.selected
    assert eim.pairs[0, 0] == 1  # largest entry of row 0


def test_zero_training_rejected():
    with pytest.raises(ZeroTrainingSet):
        eim_greedy(np.zeros((4, 6)), 2, 1e-8)
    with pytest.raises(ZeroTrainingSet):
        eim_greedy(np.empty((0, 6)), 2, 1e-8)


def test_consume_matches_copy(training):
    keep = eim_greedy(training.copy(), 2, 1e-9)
    scratch = training.copy()
    eaten = eim_greedy(scratch, 2, 1e-9, consume=True)
    assert np.array_equal(keep.basis, eaten.basis)
    assert np.array_equal(keep.pairs, eaten.pairs)
    # the scratch matrix was overwritten in place
    assert not np.array_equal(scratch, training)


def test_max_modes_cap(training):
    capped = eim_greedy(training.copy(), 2, 1e-14, max_modes=4)
    assert capped.n_modes == 4
    assert len(capped.error_history) == 5


def test_sliced_prefix_consistency(training, eim):
    m = eim.n_modes_at(1e-4)
    assert 0 < m < eim.n_modes
    cut = eim.sliced(1e-4)
    assert cut.n_modes == m
    assert np.array_equal(cut.basis, eim.basis[:, :m])
    assert np.array_equal(cut.collocation, eim.collocation[:m, :m])
    assert np.array_equal(cut.recombination, eim.recombination[:m])
    assert cut.error_history[-1] < 1e-4
    with pytest.raises(DimensionMismatch):
        eim.sliced(n_modes=eim.n_modes + 1)


def test_sliced_still_interpolates(training, eim):
    cut = eim.sliced(1e-4)
    flat = cut.pair_flat
    worst = 0.0
    for row in training:
        w = interpolation_weights(cut, row[flat])
        err = np.abs(cut.basis @ w - row).max() / np.abs(row).max()
        worst = max(worst, err)
    assert worst < 1e-4
