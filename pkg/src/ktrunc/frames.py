"""Partitioned orthonormal frames.

A frame is stored as a ``(k, N)`` array whose rows are the frame vectors, in
block order: rows ``offsets[i]:offsets[i+1]`` span the subspace ``V_i``.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np

FRAME_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    ks: tuple
    ambient_dim: int

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        object.__setattr__(self, "ks", ks)
        if not ks:
            raise ValueError("partition needs at least one block")
        if any(k < 1 for k in ks):
            raise ValueError(f"block sizes must be >= 1, got {ks}")
        if any(a > b for a, b in zip(ks, ks[1:])):
            raise ValueError(f"block sizes must be nondecreasing, got {ks}")
        if sum(ks) > self.ambient_dim:
            raise ValueError(f"sum of block sizes {sum(ks)} exceeds ambient dimension {self.ambient_dim}")

    @property
    def k(self):
        return sum(self.ks)

    @property
    def n_blocks(self):
        return len(self.ks)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.ks)]).astype(int)

    def block_sets(self):
        """1-based index sets A_i."""
        off = self.offsets
        return [list(range(off[i] + 1, off[i + 1] + 1)) for i in range(self.n_blocks)]

    def blocks(self, vectors):
        off = self.offsets
        return [vectors[off[i]:off[i + 1]] for i in range(self.n_blocks)]

    @property
    def is_full(self):
        return self.k == self.ambient_dim


def make_partition(ks, N):
    return Partition(tuple(ks), int(N))


def block_index(partition, i, j):
    """Global 1-based frame index of vector ``j`` of block ``i`` (both 1-based)."""
    if not 1 <= i <= partition.n_blocks:
        raise IndexError(f"block {i} out of range 1..{partition.n_blocks}")
    if not 1 <= j <= partition.ks[i - 1]:
        raise IndexError(f"vector {j} out of range 1..{partition.ks[i - 1]}")
    return int(partition.offsets[i - 1]) + j


@dataclass(frozen=True, eq=False)
class BlockFrame:
    vectors: np.ndarray
    partition: Partition = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        if v.shape != (self.partition.k, self.partition.ambient_dim):
            raise ValueError(f"frame shape {v.shape} does not match partition "
                             f"({self.partition.k}, {self.partition.ambient_dim})")
        err = gram_error(v)
        if err > 1e-10:
            raise ValueError(f"frame is not orthonormal (Gram error {err:.3e})")

    def blocks(self):
        return self.partition.blocks(self.vectors)

    def key(self):
        # deterministic tie-break between equally good frames
        return tuple(np.round(self.vectors.ravel(), 12))


def gram_error(vectors):
    v = np.asarray(vectors, dtype=float)
    return float(np.max(np.abs(v @ v.T - np.eye(len(v))))) if len(v) else 0.0


def orthonormalize(rows):
    """Gram-Schmidt via QR with the sign convention diag(R) > 0.

    Row order is preserved, so block membership is preserved as well.
    Returns ``(Q_rows, rank_ok)``.
    """
    a = np.asarray(rows, dtype=float)
    q, r = np.linalg.qr(a.T)
    d = np.diag(r)
    scale = max(1.0, float(np.max(np.abs(d)))) if d.size else 1.0
    rank_ok = bool(np.all(np.abs(d) > 1e-10 * scale))
    signs = np.where(d < 0, -1.0, 1.0)
    q = q * signs
    # a second pass cleans up the last ulps of orthogonality
    q2, r2 = np.linalg.qr(q)
    q2 = q2 * np.where(np.diag(r2) < 0, -1.0, 1.0)
    return q2.T, rank_ok


def complete_basis(rows, N, rng=None):
    """Extend orthonormal ``rows`` to a full orthonormal basis of R^N."""
    basis = [np.asarray(r, dtype=float) for r in np.asarray(rows, dtype=float).reshape(-1, N)]
    candidates = np.eye(N) if rng is None else rng.standard_normal((N, N))
    for c in candidates:
        if len(basis) == N:
            break
        w = c.copy()
        for _ in range(2):
            for b in basis:
                w -= np.dot(w, b) * b
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            basis.append(w / nrm)
    return np.array(basis)


def sample_frame(partition, seed):
    """Haar-distributed frame (first k rows of a random orthogonal matrix)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    N = partition.ambient_dim
    g = rng.standard_normal((N, N))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    return BlockFrame(q.T[: partition.k].copy(), partition)


def retract(frame, perturbation, step):
    """Move ``frame`` to the nearest-by-Gram-Schmidt frame to ``frame + step*P``."""
    if step < 0:
        raise ValueError("step must be nonnegative")
    if step == 0:
        return frame
    p = np.asarray(perturbation, dtype=float).reshape(frame.vectors.shape)
    moved = frame.vectors + step * p
    q, rank_ok = orthonormalize(moved)
    if not rank_ok:
        q = _repair(moved, frame.partition, step)
    return BlockFrame(q, frame.partition)


def _repair(moved, partition, seed):
    # keep the independent rows in order, fill the rest from a random completion
    N = partition.ambient_dim
    kept = []
    for row in moved:
        w = row - sum(np.dot(row, b) * b for b in kept) if kept else row.copy()
        nrm = np.linalg.norm(w)
        if nrm > 1e-8 * max(1.0, np.linalg.norm(row)):
            kept.append(w / nrm)
        else:
            kept.append(None)
    good = [v for v in kept if v is not None]
    rng = np.random.default_rng(abs(hash(float(seed))) % 2**32)
    full = complete_basis(np.array(good).reshape(-1, N), N, rng)
    fill = iter(full[len(good):])
    out = np.array([v if v is not None else next(fill) for v in kept])
    return orthonormalize(out)[0]


def rotation_generators(N):
    """Basis of so(N): the matrices E_ab - E_ba, a < b."""
    gens = []
    for a, b in itertools.combinations(range(N), 2):
        g = np.zeros((N, N))
        g[a, b], g[b, a] = 1.0, -1.0
        gens.append(g)
    return gens


def canonical_sign(vectors):
    """Flip each row so its largest-magnitude entry is positive."""
    v = np.array(vectors, dtype=float)
    for row in v:
        i = int(np.argmax(np.abs(row) - 1e-12 * np.arange(len(row))))
        if row[i] < 0:
            row *= -1.0
    return v


def assignment_frames(basis, partition):
    """All frames whose blocks are drawn from the rows of an orthonormal ``basis``.

    Within-block order is irrelevant to every objective, so each block takes
    its vectors as a sorted index subset.
    """
    N = len(basis)
    out = []

    def rec(i, used, acc):
        if i == partition.n_blocks:
            out.append(np.array([basis[j] for j in acc]))
            return
        free = [j for j in range(N) if j not in used]
        for combo in itertools.combinations(free, partition.ks[i]):
            rec(i + 1, used | set(combo), acc + list(combo))

    rec(0, set(), [])
    return [BlockFrame(canonical_sign(v), partition) for v in out]
