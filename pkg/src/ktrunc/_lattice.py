"""Wide-stencil monotone discretization of the block operators on a lattice.

Every one-dimensional ray integral runs along a lattice direction ``d``, so
the samples ``u(x + m d h)`` are grid values.  Beyond the first cell, each
half-ray reads the data as ``(tau - t)^s * w(t)`` with ``w`` the piecewise
linear interpolant of ``u_m / (tau - m)^s`` and ``tau`` the exact distance
to the boundary, which is exact to second order for profiles behaving like
``d(x)^s``.  The first cell reads the data along the whole chord as
``((tp - t)(tm + t))^s W(t)`` with ``W`` quadratic, so the integral stays
finite for every ``s < 1`` and nodes next to the boundary see the exit
points instead of a jump to zero.  All weights on neighbours are
positive, so each frame operator, and any max or min over frames, is
monotone.
"""

from functools import lru_cache
import itertools
import math

import numpy as np
from scipy import sparse, special

from .kernels import normalizing_constant


@lru_cache(maxsize=None)
def hat_weights(s, M):
    """int hat_m(t) t^{-1-2s} dt on t >= 1 for m = 1..M (unit spacing)."""
    t0, w0 = np.polynomial.legendre.leggauss(24)
    t0, w0 = (t0 + 1) / 2, w0 / 2
    c = np.zeros(M + 1)
    for m in range(1, M + 1):
        # rising half on [m-1, m] (absent for m = 1), falling half on [m, m+1]
        if m > 1:
            t = m - 1 + t0
            c[m] += np.sum(w0 * (t - m + 1) * t ** (-1 - 2 * s))
        t = m + t0
        c[m] += np.sum(w0 * (m + 1 - t) * t ** (-1 - 2 * s))
    return c[1:]


def primitive_directions(N, max_coord):
    """Lattice directions up to sign: primitive integer vectors, first nonzero > 0."""
    out = []
    for v in itertools.product(range(-max_coord, max_coord + 1), repeat=N):
        v = np.array(v)
        if not v.any() or math.gcd(*[abs(int(a)) for a in v]) != 1:
            continue
        if v[np.nonzero(v)[0][0]] < 0:
            continue
        out.append(tuple(int(a) for a in v))
    return sorted(out, key=lambda d: (sum(a * a for a in d), d))


def _plane_directions(p, q, dirs):
    """Lattice directions in span(p, q) with half-circle trapezoid weights."""
    P = np.array(p, dtype=float)
    Q = np.array(q, dtype=float)
    e1 = P / np.linalg.norm(P)
    e2 = Q - (Q @ e1) * e1
    e2 /= np.linalg.norm(e2)
    normal = None
    inplane = []
    for d in dirs:
        v = np.array(d, dtype=float)
        if abs(np.linalg.norm(v) ** 2 - (v @ e1) ** 2 - (v @ e2) ** 2) < 1e-9:
            ang = math.atan2(v @ e2, v @ e1) % math.pi
            inplane.append((ang, d))
    inplane.sort()
    angs = np.array([a for a, _ in inplane])
    nxt = np.roll(angs, -1)
    nxt[-1] += math.pi
    prv = np.roll(angs, 1)
    prv[0] -= math.pi
    weights = (nxt - prv) / 2
    return tuple(d for _, d in inplane), tuple(weights.tolist())


def lattice_frames(partition, max_coord):
    """Frames built from mutually orthogonal lattice directions.

    Each frame is a tuple of blocks; a block is ``(n, dirs, weights)`` where
    ``dirs`` are lattice directions and ``weights`` the angular weights (1 for
    a one-dimensional block).
    """
    N = partition.ambient_dim
    if max(partition.ks) > 2:
        raise ValueError("the lattice scheme supports blocks of dimension 1 and 2")
    dirs = primitive_directions(N, max_coord)
    arr = {d: np.array(d) for d in dirs}
    frames = {}

    def extend(chosen):
        if len(chosen) == partition.k:
            yield list(chosen)
            return
        for d in dirs:
            if d in chosen:
                continue
            if all(arr[d] @ arr[c] == 0 for c in chosen):
                yield from extend(chosen + [d])

    for tup in extend([]):
        blocks = []
        for i, n in enumerate(partition.ks):
            off = int(partition.offsets[i])
            members = tup[off: off + n]
            if n == 1:
                blocks.append((1, (members[0],), (1.0,)))
            else:
                ds, ws = _plane_directions(members[0], members[1], dirs)
                blocks.append((2, ds, ws))
        key = tuple(sorted((b[0], b[1]) for b in blocks))
        frames.setdefault(key, tuple(blocks))
    return [frames[k] for k in sorted(frames)]


_GL = tuple(a for a in np.polynomial.legendre.leggauss(16))
_GL01 = ((_GL[0] + 1) / 2, _GL[1] / 2)


@lru_cache(maxsize=None)
def _jacobi_end(s, order=16):
    # nodes/weights on [0, 1] for the weight (1 - v)**s
    x, w = special.roots_jacobi(order, s, 0.0)
    return (x + 1) / 2, w / 2 ** (s + 1)


def _core_integrals(tp, tm, lo, hi, s, alpha, beta):
    """(int A, int a, int b) over [lo, hi] for the chord model, see ``core_weights``."""
    x, w = special.roots_jacobi(16, alpha, beta)
    L = (hi - lo)[:, None]
    t = lo[:, None] + L * (1 + x) / 2
    jac = (L / 2) * w / ((1 - x) ** alpha * (1 + x) ** beta)
    P, M = tp[:, None], tm[:, None]
    gp = (np.maximum(P - t, 0.0) * np.maximum(M + t, 0.0)) ** s
    gm = (np.maximum(P + t, 0.0) * np.maximum(M - t, 0.0)) ** s
    g0 = (P * M) ** s
    k = t ** (-1 - 2 * s)
    return (
        np.sum(jac * (gp + gm - 2 * g0) * k, axis=1),
        np.sum(jac * (gp - gm) * t * k, axis=1),
        np.sum(jac * (gp + gm) * t * t * k, axis=1),
    )


def core_weights(tp, tm, s):
    """Weights on (u_{+1}, u_0, u_{-1}) for the first cell of a two-sided ray.

    Along the chord the data are read as ``u = g W`` with
    ``g(t) = ((tp - t)_+ (tm + t)_+)^s``; ``W`` is the quadratic through the
    available neighbours, or linear when a neighbour is missing or the
    quadratic would give a negative weight.  Unit spacing.  Neighbours that
    are left out get weight zero, so the caller may skip them.
    """
    tp = np.atleast_1d(np.asarray(tp, dtype=float))
    tm = np.atleast_1d(np.asarray(tm, dtype=float))
    g0 = (tp * tm) ** s
    p1 = np.minimum(np.minimum(tp, tm), 1.0)
    p2 = np.minimum(np.maximum(tp, tm), 1.0)
    IA, Ia, Ib = np.zeros_like(tp), np.zeros_like(tp), np.zeros_like(tp)

    def add(sel, lo, hi, alpha, beta):
        if sel.any():
            A, a, b = _core_integrals(tp[sel], tm[sel], lo[sel], hi[sel], s, alpha, beta)
            IA[sel] += A
            Ia[sel] += a
            Ib[sel] += b

    # first piece: t^{1-2s} at 0, and (p1 - t)^s where a ray exits in the cell
    cut = p1 < 1.0
    zero = np.zeros_like(tp)
    add(cut, zero, p1, s, 1 - 2 * s)
    add(~cut, zero, p1, 0.0, 1 - 2 * s)
    # second piece: one side of g left
    add(p2 > p1 + 1e-14, p1, p2, s, 0.0)
    # beyond both exits only -2 g0 t^{-1-2s} remains
    rest = p2 < 1.0
    IA[rest] += -2 * g0[rest] * (p2[rest] ** (-2 * s) - 1) / (2 * s)
    # a neighbour closer than the boundary gap to the exit is not used:
    # dividing by its small chord weight would inflate the weights
    has_p, has_m = tp >= 1 + BOUNDARY_GAP, tm >= 1 + BOUNDARY_GAP
    wp, wm, w0 = np.zeros_like(tp), np.zeros_like(tp), IA.copy()
    quad = has_p & has_m & (Ia + Ib >= 0) & (Ib - Ia >= 0)
    wp[quad] = (Ia + Ib)[quad] / 2
    wm[quad] = (Ib - Ia)[quad] / 2
    w0[quad] -= Ib[quad]
    # one-sided slope toward the side where its weight is positive
    back = ~quad & has_m & (Ia <= 0)
    wm[back] = -Ia[back]
    w0[back] += Ia[back]
    fwd = ~quad & ~back & has_p & (Ia >= 0)
    wp[fwd] = Ia[fwd]
    w0[fwd] -= Ia[fwd]
    gp = np.where(has_p, np.abs(tp - 1) * (tm + 1), 1.0) ** s
    gm = np.where(has_m, (tp + 1) * np.abs(tm - 1), 1.0) ** s
    return wp / gp, w0 / g0, wm / gm


def stub_weight(tp, tm, s):
    """int_1^tp (g(t) / g(0)) t^{-1-2s} dt, g the chord weight of ``core_weights``.

    Used on half-rays that carry no lattice node before the exit (zero
    where ``tp <= 1``): the data there are read as ``g W_0``.
    """
    tp = np.atleast_1d(np.asarray(tp, dtype=float))
    tm = np.atleast_1d(np.asarray(tm, dtype=float))
    out = np.zeros_like(tp)
    sel = tp > 1.0
    if sel.any():
        P, M = tp[sel][:, None], tm[sel][:, None]
        x, w = _jacobi_end(s)
        L = P - 1
        t = 1 + L * x
        ratio = (L * (1 - x) / P) ** s * ((M + t) / M) ** s
        out[sel] = np.sum(L * w * ratio / (1 - x) ** s * t ** (-1 - 2 * s), axis=1)
    return out


BOUNDARY_GAP = 0.5


def ray_weights(tau, s, gap=None):
    """Hat weights for many half-rays at unit spacing.

    Row ``i`` holds ``c_1..c_J`` (zero-padded) for a ray leaving the domain
    at distance ``tau[i]``: ``c_m = int_1^tau phi_m(t) t^{-1-2s} dt`` with
    ``phi_m`` the cardinal function of the boundary-weighted interpolant.
    The last used node keeps a distance of at least ``gap`` to the boundary;
    closer nodes make the weighted interpolant overshoot, its weights then
    exceed the diagonal and the scheme stops being proper.
    """
    gap = BOUNDARY_GAP if gap is None else gap
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    J = np.maximum(np.ceil(tau - gap - 1e-12).astype(int), 0)
    J = np.where((J >= 1) & (tau - J < gap), J - 1, J)
    Jmax = int(J.max(initial=0))
    c = np.zeros((len(tau), Jmax))
    if Jmax == 0:
        return c, J
    t0, w0 = _GL01
    m = np.arange(1, Jmax + 1, dtype=float)[None, :]
    T = tau[:, None]
    used = m <= J[:, None]
    safe_m = np.where(used, m, 0.0)
    scale = np.where(used, np.abs(T - safe_m) ** (-s), 0.0)

    def cell(lo, shape_fn):
        tt = lo[..., None] + t0
        gap_t = np.maximum(T[..., None] - tt, 0.0)
        return np.sum(w0 * shape_fn * gap_t**s * tt ** (-1 - 2 * s), axis=-1)

    # rising half of node m on [m-1, m] for 2 <= m <= J
    rise = (m >= 2) & used
    c += np.where(rise, cell(np.maximum(m - 1, 1.0) + 0 * T, t0), 0.0) * scale
    # falling half of node m on [m, m+1] for m < J
    fall = m < J[:, None]
    c += np.where(fall, cell(m + 0 * T, 1 - t0), 0.0) * scale
    # last cell [J, tau]: w constant, (tau - t)^s handled by a Jacobi rule
    v, wv = _jacobi_end(s)
    has = J >= 1
    Jf = np.where(has, J, 1).astype(float)
    L = np.where(has, tau - Jf, 1.0)
    # ((tau - t)/(tau - J))^s = (1 - v)^s is the Jacobi weight itself
    last = L * np.sum(wv * (Jf[:, None] + L[:, None] * v) ** (-1 - 2 * s), axis=1)
    rows = np.flatnonzero(has)
    c[rows, J[rows] - 1] += last[rows]
    return c, J


class LatticeOperator:
    """Discrete extremal operator on the interior nodes of a convex domain.

    Unknowns are the nodal values inside the domain; the exterior is zero.
    ``apply`` returns the max (``plus``) or min (``minus``) over the lattice
    frames of the frame operators, each a sparse matrix.
    """

    def __init__(self, nodes, domain, h, partition, s, sign, max_coord=2):
        self.h = float(h)
        self.s = float(s)
        self.sign = sign
        nodes = np.asarray(nodes, dtype=float)
        self.shape = nodes.shape[:-1]
        N = len(self.shape)
        inside = domain.contains(nodes)
        self.mask = inside
        ids = np.full(self.shape, -1)
        ids[inside] = np.arange(int(inside.sum()))
        self.n = int(inside.sum())
        self.frames = lattice_frames(partition, max_coord)
        self.directions = sorted({d for fr in self.frames for _, ds, _ in fr for d in ds})
        consts = {n: normalizing_constant(n, s) for n in set(partition.ks)}
        index = np.argwhere(inside)
        pts = nodes[inside]
        lines = {d: self._line_matrix(d, index, pts, ids, domain) for d in self.directions}
        self.matrices = []
        diag = []
        for fr in self.frames:
            A = sparse.csr_matrix((self.n, self.n))
            for n, ds, ws in fr:
                for d, w in zip(ds, ws):
                    A = A + consts[n] * w * lines[d]
            A = A.tocsr()
            self.matrices.append(A)
            diag.append(float(np.max(-A.diagonal())) if self.n else 0.0)
        self.diagonal = max(diag) if diag else 0.0

    def _line_matrix(self, d, index, pts, ids, domain):
        s = self.s
        dv = np.array(d)
        length = math.sqrt(float(dv @ dv))
        delta = self.h * length
        rows, cols, vals = [], [], []
        taus = {sgn: domain.exit_distance(pts, sgn * dv / length) / delta for sgn in (1, -1)}
        wp, w0, wm = core_weights(taus[1], taus[-1], s)
        diag = w0 - 1 / s
        for sgn, wcore in ((1, wp), (-1, wm)):
            tau = taus[sgn]
            c, J = ray_weights(tau, s)
            other = taus[-sgn]
            stub = J == 0
            diag[stub] += stub_weight(tau[stub], other[stub], s)
            for m in range(1, c.shape[1] + 1):
                sel = np.flatnonzero(J >= m)
                nb = index[sel] + sgn * m * dv
                rows.append(sel)
                cols.append(ids[tuple(nb.T)])
                vals.append(c[sel, m - 1])
            # first-cell neighbour (inside whenever its weight is nonzero)
            sel = np.flatnonzero(wcore > 0)
            nb = index[sel] + sgn * dv
            rows.append(sel)
            cols.append(ids[tuple(nb.T)])
            vals.append(wcore[sel])
        rows.append(np.arange(self.n))
        cols.append(np.arange(self.n))
        vals.append(diag)
        M = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n, self.n)
        )
        # for s near 1 the chord model can overshoot on constants next to the
        # boundary; moving the excess onto the diagonal keeps the line proper
        excess = np.maximum(np.asarray(M.sum(axis=1)).ravel(), 0.0)
        if excess.any():
            M = (M - sparse.diags(excess)).tocsr()
        return delta ** (-2 * s) * M

    def frame_values(self, u):
        return np.stack([A @ u for A in self.matrices])

    def apply(self, u):
        return self.extremal(u, self.sign)

    def extremal(self, u, sign):
        vals = self.frame_values(u)
        return vals.max(axis=0) if sign == "plus" else vals.min(axis=0)

    def offdiag_excess(self):
        """max over rows and frames of (sum of off-diagonal weights - diagonal weight)."""
        worst = -np.inf
        for A in self.matrices:
            d = A.diagonal()
            off = np.asarray(A.sum(axis=1)).ravel() - d
            worst = max(worst, float(np.max(off + d)))
        return worst
