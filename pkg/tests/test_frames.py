import numpy as np
import pytest
from hypothesis import given, strategies as st

from ktrunc.frames import (
    BlockFrame,
    Partition,
    assignment_frames,
    block_index,
    canonical_sign,
    complete_basis,
    gram_error,
    make_partition,
    orthonormalize,
    retract,
    rotation_generators,
    sample_frame,
)

PARTITIONS = [([1], 2), ([1, 1], 3), ([1, 2], 3), ([2], 3), ([1, 1], 4), ([1, 2], 4), ([1, 1, 1], 3)]


@st.composite
def partitions(draw):
    N = draw(st.integers(1, 5))
    ks = sorted(draw(st.lists(st.integers(1, N), min_size=1, max_size=N)))
    while sum(ks) > N:
        ks.pop()
    if not ks:
        ks = [1]
    return make_partition(ks, N)


def test_partition_properties():
    p = make_partition([1, 2], 4)
    assert p.k == 3 and p.n_blocks == 2 and not p.is_full
    assert list(p.offsets) == [0, 1, 3]
    assert p.block_sets() == [[1], [2, 3]]
    assert make_partition([1, 2], 3).is_full


@pytest.mark.parametrize("ks, N", [([2, 1], 3), ([1, 1], 1), ([0], 2), ([], 2)])
def test_partition_rejects(ks, N):
    with pytest.raises(ValueError):
        make_partition(ks, N)


def test_block_index():
    p = make_partition([1, 2], 3)
    assert block_index(p, 1, 1) == 1
    assert block_index(p, 2, 2) == 3
    with pytest.raises(IndexError):
        block_index(p, 3, 1)
    with pytest.raises(IndexError):
        block_index(p, 1, 2)


@given(p=partitions(), seed=st.integers(0, 2**31))
def test_sample_frame_orthonormal(p, seed):
    f = sample_frame(p, seed)
    assert f.vectors.shape == (p.k, p.ambient_dim)
    assert gram_error(f.vectors) < 1e-12
    assert np.array_equal(f.vectors, sample_frame(p, seed).vectors)


def test_blockframe_rejects_bad_input():
    p = make_partition([1, 1], 2)
    with pytest.raises(ValueError):
        BlockFrame(np.array([[1.0, 0.0], [1.0, 0.0]]), p)
    with pytest.raises(ValueError):
        BlockFrame(np.eye(3)[:2], p)


@given(p=partitions(), seed=st.integers(0, 1000), step=st.floats(0, 2))
def test_retract_stays_on_manifold(p, seed, step):
    f = sample_frame(p, seed)
    P = np.random.default_rng(seed + 1).standard_normal(f.vectors.shape)
    g = retract(f, P, step)
    assert gram_error(g.vectors) < 1e-10


def test_retract_rank_deficient_repair():
    p = make_partition([1, 1], 3)
    f = BlockFrame(np.eye(3)[:2], p)
    # pushes both rows onto the same line
    g = retract(f, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]), 1e8)
    assert gram_error(g.vectors) < 1e-10


def test_retract_zero_step_and_negative():
    f = sample_frame(make_partition([1], 2), 0)
    assert retract(f, np.ones((1, 2)), 0.0) is f
    with pytest.raises(ValueError):
        retract(f, np.ones((1, 2)), -1.0)


def test_orthonormalize_preserves_row_order():
    rows = np.array([[2.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    q, ok = orthonormalize(rows)
    assert ok
    assert np.allclose(q, [[1, 0, 0], [0, 1, 0]])


@given(seed=st.integers(0, 1000), N=st.integers(2, 6))
def test_complete_basis(seed, N):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(N)
    B = complete_basis(v / np.linalg.norm(v), N)
    assert B.shape == (N, N)
    assert gram_error(B) < 1e-10


def test_rotation_generators_skew():
    gens = rotation_generators(4)
    assert len(gens) == 6
    for g in gens:
        assert np.allclose(g, -g.T)


def test_canonical_sign():
    v = canonical_sign(np.array([[0.0, -1.0], [-0.6, 0.8]]))
    assert np.allclose(v, [[0, 1], [-0.6, 0.8]])


@pytest.mark.parametrize("ks, N, count", [([1], 3, 3), ([1, 1], 3, 6), ([1, 2], 3, 3), ([2], 4, 6), ([1, 1, 1], 3, 6)])
def test_assignment_frames_count(ks, N, count):
    p = make_partition(ks, N)
    frames = assignment_frames(np.eye(N), p)
    assert len(frames) == count
    assert len({f.key() for f in frames}) == count


def test_partition_is_hashable_value():
    assert Partition((1, 1), 3) == make_partition([1, 1], 3)
