"""Exact dense and sparse linear algebra over the prime field F_p, p odd.

Scalars are canonical representatives 0..p-1 stored in integer numpy arrays.
The dense path is the blocked elimination of `_kernels`; the sparse path is a
dict-of-rows elimination with the same pivot order.  Both produce the unique
reduced row echelon form, so all reported bases agree between paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import matmul_mod, rank_mod  # re-exported

#: matrices at least this large default to sparse storage in Mat.build
SPARSE_DIM_THRESHOLD = 512


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True)
class FieldConfig:
    """An odd prime field F_p."""

    p: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.p < 3:
            raise ValueError("p must be an odd prime >= 3 (p = 2 unsupported)")


class DimensionMismatch(ValueError):
    pass


class Mat:
    """Immutable matrix over F_p with dense or sparse storage.

    Dense: numpy int64 array.  Sparse: per-row {col: value} dicts holding
    only nonzero canonical representatives.
    """

    __slots__ = ("p", "nrows", "ncols", "kind", "_a", "_rows")

    def __init__(self, p, nrows, ncols, kind, a=None, rows=None):
        self.p = p
        self.nrows = nrows
        self.ncols = ncols
        self.kind = kind
        self._a = a
        self._rows = rows

    # -- constructors -------------------------------------------------------
    @classmethod
    def dense(cls, array, p):
        a = np.ascontiguousarray(np.asarray(array, dtype=np.int64) % p)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(p, a.shape[0], a.shape[1], "dense", a=a)

    @classmethod
    def sparse(cls, entries, shape, p):
        """Build from an iterable of (row, col, value) triples."""
        nrows, ncols = shape
        rows = [dict() for _ in range(nrows)]
        for r, c, v in entries:
            v = int(v) % p
            if not (0 <= r < nrows and 0 <= c < ncols):
                raise IndexError((r, c))
            if v:
                rows[r][c] = v
            elif c in rows[r]:
                del rows[r][c]
        return cls(p, nrows, ncols, "sparse", rows=rows)

    @classmethod
    def build(cls, array, p):
        """Dense or sparse storage chosen by the dimension threshold."""
        a = np.asarray(array, dtype=np.int64) % p
        if max(a.shape) > SPARSE_DIM_THRESHOLD:
            r, c = np.nonzero(a)
            return cls.sparse(zip(r.tolist(), c.tolist(), a[r, c].tolist()),
                              a.shape, p)
        return cls.dense(a, p)

    @classmethod
    def zeros(cls, shape, p):
        return cls.dense(np.zeros(shape, np.int64), p)

    @classmethod
    def identity(cls, n, p):
        return cls.dense(np.eye(n, dtype=np.int64), p)

    # -- views --------------------------------------------------------------
    def toarray(self):
        if self.kind == "dense":
            return self._a.copy()
        a = np.zeros((self.nrows, self.ncols), np.int64)
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                a[i, j] = v
        return a

    def to_coo(self):
        """Coordinate list [(row, col, value)], row-major, for JSON reports."""
        if self.kind == "dense":
            r, c = np.nonzero(self._a)
            return [(int(i), int(j), int(self._a[i, j])) for i, j in zip(r, c)]
        out = []
        for i, row in enumerate(self._rows):
            for j in sorted(row):
                out.append((i, j, int(row[j])))
        return out

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def transpose(self):
        return Mat.dense(self.toarray().T, self.p) if self.kind == "dense" \
            else Mat.sparse(((j, i, v) for i, j, v in self.to_coo()),
                            (self.ncols, self.nrows), self.p)

    def __eq__(self, other):
        if not isinstance(other, Mat):
            return NotImplemented
        return (self.p == other.p and self.shape == other.shape
                and np.array_equal(self.toarray(), other.toarray()))

    def __matmul__(self, other):
        if self.ncols != other.nrows:
            raise DimensionMismatch((self.shape, other.shape))
        return Mat.dense(matmul_mod(self.toarray(), other.toarray(), self.p),
                         self.p)

    def __repr__(self):
        return f"Mat({self.nrows}x{self.ncols} mod {self.p}, {self.kind})"

    # -- elimination --------------------------------------------------------
    def rref(self):
        """(RREF as Mat of same kind, pivot column tuple)."""
        if self.kind == "dense":
            work = self._a.copy()
            piv = _kernels.rref_mod(work, self.p)
            return Mat.dense(work, self.p), tuple(int(c) for c in piv)
        rows = [dict(r) for r in self._rows]
        piv = _kernels.sparse_rref(rows, self.ncols, self.p)
        m = Mat(self.p, self.nrows, self.ncols, "sparse", rows=rows)
        return m, tuple(piv)


def _echelonize_columns(vectors, p):
    """Canonical reduced-echelon basis of the column span of `vectors`."""
    if vectors.shape[1] == 0:
        return vectors.copy()
    work = np.ascontiguousarray(vectors.T.copy())
    piv = _kernels.rref_mod(work, p)
    return np.ascontiguousarray(work[:len(piv)].T)


def rank_kernel_image(M: Mat):
    """Rank, kernel basis and image basis of M, all in reduced echelon form.

    Kernel vectors are the columns of the returned kernel matrix (one per
    free column of M); image vectors are the columns of the image matrix.
    Both bases are canonical: re-running on the sparse or dense path yields
    identical output.
    """
    p = M.p
    R, piv = M.rref()
    rank = len(piv)
    Ra = R.toarray()
    K = _kernels.kernel_from_rref(Ra, np.asarray(piv, np.int64), p)
    K = _echelonize_columns(K, p)
    image = _echelonize_columns(M.toarray(), p)
    return rank, Mat.dense(K, p), Mat.dense(image, p)


class SolveResult:
    """Outcome of solve_and_cokernel.

    solutions: Mat of shape (cols, n_targets) when all targets are
    consistent, else None.  inconsistent: list of target indices with no
    solution.  witness: for the first inconsistent target, a row functional
    y with y M = 0 and y t != 0.  cokernel: Mat whose columns span a
    complement of the column space (unit vectors at non-pivot rows).
    """

    def __init__(self, solutions, inconsistent, witness, cokernel):
        self.solutions = solutions
        self.inconsistent = inconsistent
        self.witness = witness
        self.cokernel = cokernel

    @property
    def ok(self):
        return not self.inconsistent


def solve_and_cokernel(M: Mat, targets: Mat) -> SolveResult:
    """Solve M x = t exactly for each target column t, plus cokernel basis."""
    if M.nrows != targets.nrows:
        raise DimensionMismatch((M.shape, targets.shape))
    p = M.p
    A = M.toarray()
    T = targets.toarray()
    m, n = A.shape
    aug = np.ascontiguousarray(np.hstack([A, T]))
    _kernels.rref_mod(aug, p)
    R = np.ascontiguousarray(A.copy())
    piv = _kernels.rref_mod(R, p)
    rank = len(piv)
    # rows beyond rank of M are pure-target rows; nonzero entry there marks
    # the inconsistent target
    bad = []
    if rank < m:
        tail = aug[rank:, n:]
        bad = sorted(int(j) for j in np.nonzero(tail.any(axis=0))[0])
    solutions = None
    if not bad:
        X = np.zeros((n, T.shape[1]), np.int64)
        if rank:
            X[piv, :] = aug[:rank, n:]
        solutions = Mat.dense(X, p)
    witness = None
    if bad:
        # left kernel functional separating the first bad target
        left = _kernels.kernel_from_rref(
            *_rref_of(A.T.copy(), p), p).T  # rows: left kernel basis
        t = T[:, bad[0]]
        for y in left:
            if int(y @ t % p):
                witness = y % p
                break
    # complement of column space: unit vectors at non-pivot rows of col-echelon
    colech = np.ascontiguousarray(A.T.copy())
    cpiv = _kernels.rref_mod(colech, p)
    lead = set(int(c) for c in cpiv)
    comp = [i for i in range(m) if i not in lead]
    C = np.zeros((m, len(comp)), np.int64)
    C[comp, np.arange(len(comp))] = 1
    return SolveResult(solutions, bad, witness, Mat.dense(C, p))


def _rref_of(a, p):
    a = np.ascontiguousarray(a)
    piv = _kernels.rref_mod(a, p)
    return a, np.asarray(piv, np.int64)


class IncrementalRREF:
    """Maintains the reduced row echelon form of a growing row span.

    Rows are stored int8 (requires p < 128).  add_rows reduces a batch
    against the current span, self-reduces it, back-reduces the old rows,
    and returns the newly independent (fully reduced) rows.
    """

    def __init__(self, p, ncols):
        assert p < 128
        self.p = p
        self.ncols = ncols
        self._rows = np.zeros((0, ncols), np.int8)
        self._pivots = np.zeros(0, np.int64)

    @property
    def rank(self):
        return self._rows.shape[0]

    def rows(self):
        return self._rows.astype(np.int64)

    def pivots(self):
        return self._pivots.copy()

    def reduce(self, batch):
        """Reduce rows of `batch` modulo the current span (returns int64)."""
        batch = np.asarray(batch, np.int64) % self.p
        if self.rank and batch.shape[0]:
            coef = batch[:, self._pivots]
            if coef.any():
                batch = (batch - matmul_mod(coef, self._rows, self.p)) % self.p
        return batch

    def add_rows(self, batch):
        batch = self.reduce(batch)
        if not batch.shape[0]:
            return batch
        work = np.ascontiguousarray(batch.astype(np.int8))
        piv = _kernels.rref_mod(work, self.p)
        k = len(piv)
        if k == 0:
            return np.zeros((0, self.ncols), np.int64)
        new_rows = work[:k]
        new_piv = np.asarray(piv, np.int64)
        if self.rank:
            coef = self._rows[:, new_piv]
            if coef.any():
                old = (self._rows.astype(np.int64) -
                       matmul_mod(coef, new_rows, self.p)) % self.p
                self._rows = old.astype(np.int8)
        allrows = np.vstack([self._rows, new_rows])
        allpiv = np.concatenate([self._pivots, new_piv])
        order = np.argsort(allpiv)
        self._rows = np.ascontiguousarray(allrows[order])
        self._pivots = allpiv[order]
        return new_rows.astype(np.int64)


# -- raw-array helpers used by the heavy engines ----------------------------

def rref_ip(a, p, backend=None):
    """In-place RREF of a C-contiguous integer array; returns pivot columns."""
    return _kernels.rref_mod(a, p, backend=backend)


def kernel_basis(a, p):
    """Standard kernel basis (columns) of an integer array, not re-echelonized."""
    work = np.ascontiguousarray(a.astype(np.int64) % p)
    piv = _kernels.rref_mod(work, p)
    return _kernels.kernel_from_rref(work, np.asarray(piv, np.int64), p)
