"""Interference model linear algebra.

The response in block k is y = mu 1 + beta_k 1 + T0 tau + (T1+T2+T3+T4) gamma
+ eps, where T0 is the plot-by-treatment incidence and T1..T4 pick out the
treatment of the four orthogonal neighbors (no guard plots, so border plots
simply have fewer neighbors).  Eliminating the block mean against a
within-block covariance Sigma leaves the kernel

    Btilde = Sigma^-1 - Sigma^-1 J Sigma^-1 / (1' Sigma^-1 1),

and the per-block information components C_ij = Ti' Btilde Tj (i, j in
{0, 1} with T_1 meaning the neighbor total F).  A design's information
matrix for treatment contrasts is the Schur complement
C = C00 - C01 C11^+ C10 accumulated over blocks.

Scalar reductions c_ij = tr(B_t C_ij) drive the optimality theory; they
admit closed forms in the counting statistics of the array, computed here
exactly over the rationals, with an independent matrix-product path as
cross-check (and as the only path for a general Sigma).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

from .arrays import BlockArray, CountStatistics, Shape, count_statistics

EIG_CUTOFF = 1e-10


@dataclass(frozen=True)
class Identity:
    """White within-block covariance (the reference case)."""

    def __repr__(self):
        return "Identity()"


@dataclass(frozen=True)
class TypeH:
    """Sigma = x I + y 1' + 1 y', which shares its contrast kernel with x I."""

    x: Fraction | float | int
    y: tuple | None = None

    def __post_init__(self):
        if not (float(self.x) > 0):
            raise ValueError("type-H diagonal weight x must be positive")


@dataclass(frozen=True)
class GeneralCov:
    """Arbitrary symmetric positive definite within-block covariance."""

    matrix: tuple[tuple[float, ...], ...]

    @staticmethod
    def from_matrix(m) -> "GeneralCov":
        arr = np.asarray(m, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(arr, arr.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(arr)[0] <= 0:
            raise ValueError("covariance must be positive definite")
        return GeneralCov(tuple(tuple(float(v) for v in row) for row in arr))

    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)


CovarianceSpec = Identity | TypeH | GeneralCov

IDENTITY = Identity()


def is_contrast_identity(sigma: CovarianceSpec) -> bool:
    """True when Btilde is a positive multiple of the centering projector."""
    return isinstance(sigma, (Identity, TypeH))


def rational_scale(sigma: CovarianceSpec) -> Fraction | None:
    """The exact scale 1/x relating Btilde to B_p, if representable."""
    if isinstance(sigma, Identity):
        return Fraction(1)
    if isinstance(sigma, TypeH) and isinstance(sigma.x, Rational):
        return 1 / Fraction(sigma.x)
    return None


def sigma_from_json(obj) -> CovarianceSpec:
    """Parse a covariance description.

    Accepts {"type": "identity"}, {"type": "type-h", "x": ..., "y": [...]}
    (x as int or "num/den" string stays exact), {"matrix": [[...]]}, or a
    bare dense row-major matrix.
    """
    if isinstance(obj, Mapping):
        kind = obj.get("type")
        if kind == "identity":
            return Identity()
        if kind == "type-h":
            x = obj["x"]
            x = Fraction(x) if isinstance(x, (int, str)) else float(x)
            y = obj.get("y")
            return TypeH(x, None if y is None else tuple(float(v) for v in y))
        if "matrix" in obj:
            return GeneralCov.from_matrix(obj["matrix"])
        raise ValueError(f"unrecognized covariance type {kind!r}")
    return GeneralCov.from_matrix(obj)


def sigma_matrix(sigma: CovarianceSpec, p: int) -> np.ndarray:
    if isinstance(sigma, Identity):
        return np.eye(p)
    if isinstance(sigma, TypeH):
        y = np.zeros(p) if sigma.y is None else np.asarray(sigma.y, dtype=float)
        if y.shape != (p,):
            raise ValueError(f"type-H offset vector must have length {p}")
        m = float(sigma.x) * np.eye(p) + np.outer(y, np.ones(p)) + np.outer(np.ones(p), y)
        if np.linalg.eigvalsh(m)[0] <= 0:
            raise ValueError("type-H parameters do not give a positive definite matrix")
        return m
    m = sigma.array()
    if m.shape != (p, p):
        raise ValueError(f"covariance is {m.shape[0]}x{m.shape[1]}, need {p}x{p}")
    return m


def btilde(sigma: CovarianceSpec, p: int) -> np.ndarray:
    """Block-centered precision kernel (p x p, float)."""
    if isinstance(sigma, Identity):
        return np.eye(p) - np.full((p, p), 1.0 / p)
    if isinstance(sigma, TypeH):
        return (np.eye(p) - np.full((p, p), 1.0 / p)) / float(sigma.x)
    inv = np.linalg.inv(sigma_matrix(sigma, p))
    u = inv.sum(axis=1)
    return inv - np.outer(u, u) / u.sum()


def btilde_fraction(sigma: CovarianceSpec, p: int) -> np.ndarray:
    """Exact rational Btilde; only the identity-kernel family supports it."""
    scale = rational_scale(sigma)
    if scale is None:
        raise ValueError("exact path needs Identity or rational type-H covariance")
    out = np.empty((p, p), dtype=object)
    off = -scale * Fraction(1, p)
    out[:] = off
    for i in range(p):
        out[i, i] = scale - scale * Fraction(1, p)
    return out


def _shift(n: int) -> np.ndarray:
    return np.eye(n, k=-1, dtype=np.int64)


def neighbor_matrix(shape: Shape) -> np.ndarray:
    """p x p 0/1 matrix marking orthogonally adjacent plots (colex order)."""
    a, b = shape.a, shape.b
    ka = _shift(a) + _shift(a).T
    kb = _shift(b) + _shift(b).T
    return np.kron(np.eye(b, dtype=np.int64), ka) + np.kron(kb, np.eye(a, dtype=np.int64))


@dataclass(frozen=True)
class IncidenceSet:
    """Plot-by-treatment incidences: direct and the four neighbor directions."""

    t0: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray
    t4: np.ndarray

    @property
    def f(self) -> np.ndarray:
        return self.t1 + self.t2 + self.t3 + self.t4


def incidence_matrices(s: BlockArray) -> IncidenceSet:
    shape = s.shape
    p, t = shape.p, shape.t
    t0 = np.zeros((p, t), dtype=np.int64)
    t0[np.arange(p), np.array(s.colex) - 1] = 1
    ia = np.eye(shape.a, dtype=np.int64)
    ib = np.eye(shape.b, dtype=np.int64)
    ka, kb = _shift(shape.a), _shift(shape.b)
    return IncidenceSet(
        t0=t0,
        t1=np.kron(ib, ka) @ t0,
        t2=np.kron(ib, ka.T) @ t0,
        t3=np.kron(kb, ia) @ t0,
        t4=np.kron(kb.T, ia) @ t0,
    )


@dataclass(frozen=True)
class CoefficientTriple:
    """Quadratic coefficients (c00, c01, c11) of one array, with provenance."""

    c00: Fraction | float
    c01: Fraction | float
    c11: Fraction | float
    source: str = "closed-form"

    def astuple(self):
        return (self.c00, self.c01, self.c11)

    def scaled(self, factor) -> "CoefficientTriple":
        return CoefficientTriple(
            self.c00 * factor, self.c01 * factor, self.c11 * factor, self.source
        )


def c11_base(shape: Shape) -> Fraction:
    """Shape constant: the label-free part of c11 (same for every array)."""
    a, b, t, p = shape.a, shape.b, shape.t, shape.p
    return (
        Fraction(4 * p - 2 * a - 2 * b)
        - Fraction(2 * (8 * a * b - 7 * a - 7 * b + 4), t)
        + Fraction(4 * (2 * p - a - b) ** 2, p * t)
    )


def c_coeffs_closed(s: BlockArray, stats: CountStatistics | None = None) -> CoefficientTriple:
    """Exact coefficients from the counting statistics (identity kernel scale)."""
    shape = s.shape
    p, t = shape.p, shape.t
    st = stats if stats is not None else count_statistics(s)
    h00 = st.h[0][0]
    c00 = p - Fraction(h00, p)
    c01 = st.z1 - Fraction(st.h1, p)
    c11 = c11_base(shape) + st.z2 - Fraction(st.h2, p) - Fraction(2 * st.h3, p)
    return CoefficientTriple(c00, c01, c11, source="closed-form")


def c_coeffs_trace(s: BlockArray, sigma: CovarianceSpec = IDENTITY) -> CoefficientTriple:
    """Coefficients by explicit matrix products; exact over the rationals
    for the identity-kernel family, floating point otherwise."""
    shape = s.shape
    p, t = shape.p, shape.t
    inc = incidence_matrices(s)
    f = inc.f
    scale = rational_scale(sigma)
    if scale is not None:
        # p * Btilde = p I - J exactly; keep everything in integers
        u0 = inc.t0.sum(axis=0)
        u1 = f.sum(axis=0)
        g00 = p * (inc.t0.T @ inc.t0) - np.outer(u0, u0)
        g01 = p * (inc.t0.T @ f) - np.outer(u0, u1)
        g11 = p * (f.T @ f) - np.outer(u1, u1)
        c00 = Fraction(int(np.trace(g00)), p)
        c01 = Fraction(int(np.trace(g01)), p)
        c11 = Fraction(int(t * np.trace(g11) - g11.sum()), p * t)
        return CoefficientTriple(c00 * scale, c01 * scale, c11 * scale, source="trace")
    bt = btilde(sigma, p)
    t0 = inc.t0.astype(float)
    ff = f.astype(float)
    c00m = t0.T @ bt @ t0
    c01m = t0.T @ bt @ ff
    c11m = ff.T @ bt @ ff
    c00 = float(np.trace(c00m) - c00m.sum() / t)
    c01 = float(np.trace(c01m) - c01m.sum() / t)
    c11 = float(np.trace(c11m) - c11m.sum() / t)
    return CoefficientTriple(c00, c01, c11, source="trace")


def _colex_masks(shape: Shape):
    a, b = shape.a, shape.b
    k = np.arange(shape.p)
    i, j = k % a, k // a
    return i, j


def closed_numerators_batch(labels: np.ndarray, shape: Shape):
    """Vectorized closed-form path over an (N, p) label matrix.

    Returns integer numerators (n00, n01, n11) over denominators
    (p, p, p*t); exact for the identity kernel.
    """
    a, b, t, p = shape.a, shape.b, shape.t, shape.p
    lab = np.asarray(labels, dtype=np.int64)
    n = lab.shape[0]
    onehot = (lab[:, :, None] == np.arange(1, t + 1)[None, None, :]).astype(np.int64)
    i, j = _colex_masks(shape)
    subgrids = (j <= b - 2, j >= 1, i <= a - 2, i >= 1)
    f0 = onehot.sum(axis=1)
    fsub = [onehot[:, m, :].sum(axis=1) for m in subgrids]
    h00 = (f0 * f0).sum(axis=1)
    h1 = sum((f0 * fk).sum(axis=1) for fk in fsub)
    h2 = sum((fk * fk).sum(axis=1) for fk in fsub)
    h3 = sum(
        (fsub[x] * fsub[y]).sum(axis=1) for x in range(4) for y in range(x + 1, 4)
    )

    def same(mask: np.ndarray, offset: int) -> np.ndarray:
        src = np.flatnonzero(mask)
        return (lab[:, src] == lab[:, src + offset]).sum(axis=1)

    zr1 = same(j <= b - 2, a)
    zc1 = same(i <= a - 2, 1)
    zr2 = same(j <= b - 3, 2 * a) if b >= 3 else np.zeros(n, dtype=np.int64)
    zc2 = same(i <= a - 3, 2) if a >= 3 else np.zeros(n, dtype=np.int64)
    zd1 = same((i >= 1) & (j <= b - 2), a - 1)
    zd2 = same((i <= a - 2) & (j <= b - 2), a + 1)
    z1 = 2 * zr1 + 2 * zc1
    z2 = 2 * zr2 + 2 * zc2 + 4 * zd1 + 4 * zd2

    eta_num = (
        (4 * p - 2 * a - 2 * b) * p * t
        - 2 * (8 * a * b - 7 * a - 7 * b + 4) * p
        + 4 * (2 * p - a - b) ** 2
    )
    n00 = p * p - h00
    n01 = p * z1 - h1
    n11 = eta_num + p * t * z2 - t * h2 - 2 * t * h3
    return n00, n01, n11


def trace_numerators_batch(labels: np.ndarray, shape: Shape):
    """Vectorized matrix-product path; same scaled-integer contract as
    closed_numerators_batch but built from incidence algebra."""
    t, p = shape.t, shape.p
    lab = np.asarray(labels, dtype=np.int64)
    onehot = (lab[:, :, None] == np.arange(1, t + 1)[None, None, :]).astype(np.int64)
    m = neighbor_matrix(shape)
    fmat = np.einsum("pq,nqt->npt", m, onehot)
    bnum = p * np.eye(p, dtype=np.int64) - np.ones((p, p), dtype=np.int64)
    bo = np.einsum("pq,nqt->npt", bnum, onehot)
    bf = np.einsum("pq,nqt->npt", bnum, fmat)
    n00 = np.einsum("npt,npt->n", onehot, bo)
    n01 = np.einsum("npt,npt->n", onehot, bf)
    tr11 = np.einsum("npt,npt->n", fmat, bf)
    nu = m.sum(axis=1)
    corner = int(nu @ bnum @ nu)
    n11 = t * tr11 - corner
    return n00, n01, n11


def triple_table(
    pool: Sequence[BlockArray], sigma: CovarianceSpec = IDENTITY
) -> np.ndarray:
    """(N, 3) float table of coefficients for a pool of same-shape arrays."""
    if not pool:
        return np.zeros((0, 3))
    shape = pool[0].shape
    p, t = shape.p, shape.t
    scale = rational_scale(sigma)
    if scale is not None or isinstance(sigma, TypeH):
        lab = np.array([s.colex for s in pool], dtype=np.int64)
        n00, n01, n11 = closed_numerators_batch(lab, shape)
        fac = float(scale) if scale is not None else 1.0 / float(sigma.x)
        out = np.empty((len(pool), 3))
        out[:, 0] = n00 * (fac / p)
        out[:, 1] = n01 * (fac / p)
        out[:, 2] = n11 * (fac / (p * t))
        return out
    out = np.empty((len(pool), 3))
    for k, s in enumerate(pool):
        c = c_coeffs_trace(s, sigma)
        out[k] = (c.c00, c.c01, c.c11)
    return out


def block_components(s: BlockArray, sigma: CovarianceSpec = IDENTITY, exact: bool = False):
    """Per-block information components (C00, C01, C11), each t x t."""
    shape = s.shape
    p = shape.p
    inc = incidence_matrices(s)
    f = inc.f
    if exact:
        scale = rational_scale(sigma)
        if scale is None:
            raise ValueError("exact components need Identity or rational type-H")
        u0 = inc.t0.sum(axis=0)
        u1 = f.sum(axis=0)
        g00 = p * (inc.t0.T @ inc.t0) - np.outer(u0, u0)
        g01 = p * (inc.t0.T @ f) - np.outer(u0, u1)
        g11 = p * (f.T @ f) - np.outer(u1, u1)
        fac = scale * Fraction(1, p)
        conv = np.vectorize(lambda v: Fraction(int(v)) * fac, otypes=[object])
        return conv(g00), conv(g01), conv(g11)
    bt = btilde(sigma, p)
    t0 = inc.t0.astype(float)
    ff = f.astype(float)
    return t0.T @ bt @ t0, t0.T @ bt @ ff, ff.T @ bt @ ff


def symmetric_pinv(mat: np.ndarray, cutoff: float = EIG_CUTOFF) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via eigendecomposition,
    zeroing eigenvalues below cutoff * max|eigenvalue|."""
    w, v = np.linalg.eigh(np.asarray(mat, dtype=float))
    top = np.abs(w).max() if w.size else 0.0
    keep = np.abs(w) > cutoff * max(top, 1e-300)
    inv = np.zeros_like(w)
    np.divide(1.0, w, out=inv, where=keep)
    return (v * inv) @ v.T


def _fraction_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    aug = np.concatenate([a.copy(), rhs.copy()], axis=1)
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r, col] != 0), None)
        if piv is None:
            raise np.linalg.LinAlgError("singular rational matrix")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = aug[col] / aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0:
                aug[r] = aug[r] - aug[r, col] * aug[col]
    return aug[:, n:]


def fraction_pinv(c: np.ndarray) -> np.ndarray:
    """Exact Moore-Penrose inverse of a symmetric rational matrix.

    Uses a rational basis V of the column space: pinv = V (V' C V)^-1 V'.
    """
    n = c.shape[0]
    # column-space basis by Gaussian elimination on a working copy
    work = c.astype(object).copy()
    pivots: list[int] = []
    row = 0
    for col in range(n):
        piv = next((r for r in range(row, n) if work[r, col] != 0), None)
        if piv is None:
            continue
        work[[row, piv]] = work[[piv, row]]
        work[row] = work[row] / work[row, col]
        for r in range(n):
            if r != row and work[r, col] != 0:
                work[r] = work[r] - work[r, col] * work[row]
        pivots.append(col)
        row += 1
    if not pivots:
        return np.full((n, n), Fraction(0), dtype=object)
    v = c[:, pivots]
    core = v.T @ c @ v
    inv = _fraction_solve(core, np.array(
        [[Fraction(1) if i == j else Fraction(0) for j in range(len(pivots))]
         for i in range(len(pivots))], dtype=object))
    return v @ inv @ v.T


def _schur(c00, c01, c11, exact: bool):
    if exact:
        return c00 - c01 @ fraction_pinv(c11) @ c01.T
    return c00 - c01 @ symmetric_pinv(c11) @ c01.T


def accumulate_components(
    weighted_blocks: Iterable[tuple[BlockArray, object]],
    sigma: CovarianceSpec = IDENTITY,
    exact: bool = False,
):
    """Weighted sums of (C00, C01, C11) over (array, weight) pairs."""
    acc = None
    for s, w in weighted_blocks:
        c00, c01, c11 = block_components(s, sigma, exact=exact)
        if acc is None:
            zero = Fraction(0) if exact else 0.0
            tt = c00.shape[0]
            if exact:
                acc = [np.full((tt, tt), zero, dtype=object) for _ in range(3)]
            else:
                acc = [np.zeros((tt, tt)) for _ in range(3)]
        if exact:
            w = Fraction(w)
        acc[0] = acc[0] + w * c00
        acc[1] = acc[1] + w * c01
        acc[2] = acc[2] + w * c11
    if acc is None:
        raise ValueError("no blocks given")
    return acc[0], acc[1], acc[2]


def info_matrix_exact(design, sigma: CovarianceSpec = IDENTITY, exact: bool = False) -> np.ndarray:
    """Information matrix of an exact design (blocks accumulated, then Schur)."""
    c00, c01, c11 = accumulate_components(
        ((s, 1) for s in design.blocks), sigma, exact=exact
    )
    return _schur(c00, c01, c11, exact)


def info_matrix_measure(measure, sigma: CovarianceSpec = IDENTITY, exact: bool = False) -> np.ndarray:
    """Per-block-average information matrix of an approximate measure."""
    c00, c01, c11 = accumulate_components(measure.atoms.items(), sigma, exact=exact)
    return _schur(c00, c01, c11, exact)


def centering_projector(t: int, exact: bool = False) -> np.ndarray:
    """B_t = I - J/t, the projector onto treatment contrasts."""
    if exact:
        out = np.full((t, t), -Fraction(1, t), dtype=object)
        for i in range(t):
            out[i, i] = 1 - Fraction(1, t)
        return out
    return np.eye(t) - np.full((t, t), 1.0 / t)
