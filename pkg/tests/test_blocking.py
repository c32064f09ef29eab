import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcfilter.blocking import (
    BlockedSequence,
    FunctionalWeights,
    SampledPath,
    block_path,
    block_weights,
    harmonic_map,
    harmonics,
    unblock,
)
from pcfilter.errors import DimensionError, EmptyInputError, TruncationError


def test_harmonic_enumeration():
    assert [harmonic_map(k) for k in range(1, 8)] == [0, 1, -1, 2, -2, 3, -3]
    np.testing.assert_array_equal(harmonics(5), [0, 1, -1, 2, -2])
    assert BlockedSequence.harmonic_map(4) == 2
    with pytest.raises(ValueError):
        harmonic_map(0)


@pytest.mark.parametrize("T", [1.0, 2.5])
def test_constant_path_keeps_only_zero_harmonic(T):
    c = 1.5 - 0.5j
    seq = block_path(SampledPath(T, 16, np.full(16, c)), 3)
    np.testing.assert_allclose(seq.blocks[0], [c * np.sqrt(T), 0, 0], atol=1e-12)


def test_first_harmonic_lands_on_its_index():
    N = 64
    u = (np.arange(N) + 0.5) / N
    seq = block_path(SampledPath(1.0, N, np.exp(2j * np.pi * u)), 3)
    # m(2) = +1
    np.testing.assert_allclose(seq.blocks[0], [0, 1.0, 0], atol=1e-10)


def test_identical_periods_give_identical_blocks(rng):
    period = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    seq = block_path(SampledPath(1.0, 8, np.tile(period, 2)), 4)
    np.testing.assert_allclose(seq.blocks[0], seq.blocks[1])


def test_block_weights_examples():
    T, N = 2.0, 32
    one_period = block_weights(np.concatenate([np.ones(N), np.zeros(N)]), T, N, 2)
    np.testing.assert_allclose(one_period.coeffs, [[np.sqrt(T), 0], [0, 0]], atol=1e-12)
    two_periods = block_weights(np.ones(2 * N), T, N, 2)
    np.testing.assert_allclose(two_periods.coeffs, [[np.sqrt(T), 0]] * 2, atol=1e-12)
    t = (np.arange(N) + 0.5) / N
    cosine = block_weights(np.cos(2 * np.pi * t), 1.0, N, 3)
    np.testing.assert_allclose(cosine.coeffs[0], [0, 0.5, 0.5], atol=1e-10)


def test_unblock_examples():
    zero = unblock(BlockedSequence(np.zeros((2, 3))), 8)
    assert np.all(zero.values == 0)
    T, c = 3.0, 0.7 + 0.1j
    const = unblock(BlockedSequence([[c * np.sqrt(T), 0, 0]]), 8, period_T=T)
    np.testing.assert_allclose(const.values, c, atol=1e-12)


def test_round_trip_band_limited(rng):
    blocks = rng.standard_normal((1, 5)) + 1j * rng.standard_normal((1, 5))
    path = unblock(BlockedSequence(blocks), 64)
    np.testing.assert_allclose(block_path(path, 5).blocks, blocks, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    K=st.integers(1, 6),
    extra=st.integers(0, 10),
    n_blocks=st.integers(1, 4),
    T=st.floats(0.1, 10.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_parseval_and_round_trip(K, extra, n_blocks, T, seed):
    rng = np.random.default_rng(seed)
    N = K + extra
    blocks = rng.standard_normal((n_blocks, K)) + 1j * rng.standard_normal((n_blocks, K))
    path = unblock(BlockedSequence(blocks), N, period_T=T)
    back = block_path(path, K).blocks
    np.testing.assert_allclose(back, blocks, atol=1e-9)
    energy = (T / N) * np.sum(np.abs(path.values.reshape(n_blocks, N)) ** 2, axis=1)
    np.testing.assert_allclose(np.sum(np.abs(back) ** 2, axis=1), energy, rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(K=st.integers(1, 6), N=st.integers(6, 20), seed=st.integers(0, 2**32 - 1))
def test_parseval_inequality_for_arbitrary_paths(K, N, seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    kept = np.sum(np.abs(block_path(SampledPath(1.0, N, values), K).blocks) ** 2)
    assert kept <= np.sum(np.abs(values) ** 2) / N * (1 + 1e-12)


def test_errors():
    with pytest.raises(TruncationError):
        block_path(SampledPath(1.0, 4, np.zeros(4)), 5)
    with pytest.raises(EmptyInputError):
        block_path(SampledPath(1.0, 4, np.zeros(0)), 2)
    with pytest.raises(DimensionError):
        SampledPath(1.0, 4, np.zeros(6))
    with pytest.raises(TruncationError):
        unblock(BlockedSequence(np.zeros((1, 5))), 4)
    with pytest.raises(ValueError):
        SampledPath(0.0, 4, np.zeros(4))


def test_functional_weights_summaries():
    w = FunctionalWeights([[3, 4], [0, 1]])
    assert w.J == 1 and w.K == 2
    assert w.l1_sum == pytest.approx(6.0)
    assert w.weighted_sum == pytest.approx(25 + 2 * 1)
    assert w.norm2 == pytest.approx(26.0)
    np.testing.assert_allclose(w.evaluate([0.0]), [[3, 5]])
    assert w.padded(4).shape == (4, 2)
