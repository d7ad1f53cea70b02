"""Super vector spaces, parity change, graded spaces, parity-tracked series.

Basis convention: a SuperSpace lists its even labels first, then its odd
labels.  Matrices of maps between super spaces are indexed in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: default truncation bound for parity series (covers all shipped checks at p=3)
DEFAULT_TRUNCATION = 24


@dataclass(frozen=True)
class SuperSpace:
    even: tuple = ()
    odd: tuple = ()

    def __post_init__(self):
        labels = self.even + self.odd
        if len(set(labels)) != len(labels):
            raise ValueError("basis labels must be unique")

    @classmethod
    def kmn(cls, m, n):
        """The standard space k^{m|n} with labels e1..em, f1..fn."""
        return cls(tuple(f"e{i+1}" for i in range(m)),
                   tuple(f"f{i+1}" for i in range(n)))

    @property
    def sdim(self):
        return (len(self.even), len(self.odd))

    @property
    def dim(self):
        return len(self.even) + len(self.odd)

    @property
    def labels(self):
        return self.even + self.odd

    def parities(self):
        return np.array([0] * len(self.even) + [1] * len(self.odd), np.int8)

    def flip(self):
        """The space with exchanged parities."""
        return SuperSpace(self.odd, self.even)

    def __repr__(self):
        return f"SuperSpace({len(self.even)}|{len(self.odd)})"


def flip_permutation(space: SuperSpace):
    """Index map old basis -> basis of space.flip() (odd block moves first)."""
    e, o = space.sdim
    return np.concatenate([np.arange(e, e + o), np.arange(e)])


class SuperMap:
    """A linear map between super spaces, stored as one matrix mod p.

    The even part preserves the parity blocks, the odd part swaps them;
    every map is the sum of the two.
    """

    def __init__(self, source: SuperSpace, target: SuperSpace, matrix, p):
        self.source = source
        self.target = target
        self.p = p
        self.matrix = np.asarray(matrix, dtype=np.int64) % p
        if self.matrix.shape != (target.dim, source.dim):
            raise ValueError("matrix shape does not match spaces")

    def _block_mask(self, want_even):
        tp = self.target.parities()[:, None]
        sp = self.source.parities()[None, :]
        same = (tp == sp)
        return same if want_even else ~same

    def even_part(self):
        m = np.where(self._block_mask(True), self.matrix, 0)
        return SuperMap(self.source, self.target, m, self.p)

    def odd_part(self):
        m = np.where(self._block_mask(False), self.matrix, 0)
        return SuperMap(self.source, self.target, m, self.p)

    @property
    def parity(self):
        """0 or 1 for homogeneous maps, None for mixed."""
        has_even = np.where(self._block_mask(True), self.matrix, 0).any()
        has_odd = np.where(self._block_mask(False), self.matrix, 0).any()
        if has_even and has_odd:
            return None
        return 1 if has_odd else 0

    def compose(self, other: SuperMap) -> SuperMap:
        assert other.target.labels == self.source.labels
        return SuperMap(other.source, self.target,
                        (self.matrix @ other.matrix) % self.p, self.p)

    def __eq__(self, other):
        return (isinstance(other, SuperMap)
                and self.source == other.source and self.target == other.target
                and np.array_equal(self.matrix, other.matrix))


def parity_change(x):
    """Parity change on spaces and maps: swaps parities; on a map phi it is
    (-1)^{parity(phi)} phi with source and target flipped."""
    if isinstance(x, SuperSpace):
        return x.flip()
    if isinstance(x, SuperMap):
        sp = flip_permutation(x.source)
        tp = flip_permutation(x.target)
        even = np.where(x._block_mask(True), x.matrix, 0)
        odd = np.where(x._block_mask(False), x.matrix, 0)
        signed = (even - odd) % x.p
        m = signed[np.ix_(tp, sp)]
        return SuperMap(x.source.flip(), x.target.flip(), m, x.p)
    raise TypeError(type(x))


class GradedSuperSpace:
    """Finitely supported map from integer degrees to super spaces."""

    def __init__(self, components=None):
        self.components = {int(d): s for d, s in (components or {}).items()
                           if s.dim > 0}

    def degrees(self):
        return sorted(self.components)

    def component(self, d) -> SuperSpace:
        return self.components.get(d, SuperSpace())

    def sdim(self, d):
        return self.component(d).sdim

    def total_dim(self):
        return sum(s.dim for s in self.components.values())

    def truncate(self, i):
        """Components in degrees <= i only."""
        return GradedSuperSpace({d: s for d, s in self.components.items()
                                 if d <= i})

    def check_nonnegative(self):
        if any(d < 0 for d in self.components):
            raise ValueError("graded space has components in negative degrees")

    def __eq__(self, other):
        return isinstance(other, GradedSuperSpace) and \
            {d: s.sdim for d, s in self.components.items()} == \
            {d: s.sdim for d, s in other.components.items()}


class ParitySeries:
    """Truncated series of pairs (even dim, odd dim) indexed by degree."""

    __slots__ = ("truncation", "even", "odd")

    def __init__(self, truncation=DEFAULT_TRUNCATION, even=None, odd=None):
        self.truncation = int(truncation)
        n = self.truncation + 1
        self.even = np.zeros(n, np.int64) if even is None \
            else np.asarray(even, np.int64).copy()
        self.odd = np.zeros(n, np.int64) if odd is None \
            else np.asarray(odd, np.int64).copy()
        assert len(self.even) == n and len(self.odd) == n
        if (self.even < 0).any() or (self.odd < 0).any():
            raise ValueError("series coefficients must be nonnegative")

    @classmethod
    def delta(cls, degree, even=1, odd=0, truncation=DEFAULT_TRUNCATION):
        s = cls(truncation)
        if degree <= truncation:
            s.even[degree] = even
            s.odd[degree] = odd
        return s

    @classmethod
    def unit(cls, truncation=DEFAULT_TRUNCATION):
        return cls.delta(0, 1, 0, truncation)

    def coeff(self, d):
        return (int(self.even[d]), int(self.odd[d]))

    def copy(self):
        return ParitySeries(self.truncation, self.even, self.odd)

    def swap(self):
        """Exchange even and odd coefficients in every degree."""
        return ParitySeries(self.truncation, self.odd, self.even)

    def scale(self, c):
        if c < 0:
            raise ValueError("negative multiplicity")
        return ParitySeries(self.truncation, self.even * c, self.odd * c)

    def __add__(self, other):
        self._check(other)
        return ParitySeries(self.truncation, self.even + other.even,
                            self.odd + other.odd)

    def _check(self, other):
        if self.truncation != other.truncation:
            raise ValueError("truncation mismatch")

    def __eq__(self, other):
        return (isinstance(other, ParitySeries)
                and self.truncation == other.truncation
                and np.array_equal(self.even, other.even)
                and np.array_equal(self.odd, other.odd))

    def is_zero(self):
        return not (self.even.any() or self.odd.any())

    def to_json(self):
        """JSON form: [degree, even, odd] triples, zero entries omitted."""
        out = []
        for d in range(self.truncation + 1):
            e, o = int(self.even[d]), int(self.odd[d])
            if e or o:
                out.append([d, e, o])
        return out

    @classmethod
    def from_json(cls, triples, truncation=DEFAULT_TRUNCATION):
        s = cls(truncation)
        for d, e, o in triples:
            if d <= truncation:
                s.even[d] = e
                s.odd[d] = o
        return s

    def __repr__(self):
        return f"ParitySeries({self.to_json()}, trunc={self.truncation})"


def series_product(a: ParitySeries, b: ParitySeries) -> ParitySeries:
    """Graded tensor product of dimensions: convolution in the degree,
    parity adding mod 2 (odd times odd contributes to even)."""
    a._check(b)
    n = a.truncation + 1
    ee = np.convolve(a.even, b.even)[:n]
    oo = np.convolve(a.odd, b.odd)[:n]
    eo = np.convolve(a.even, b.odd)[:n]
    oe = np.convolve(a.odd, b.even)[:n]
    return ParitySeries(a.truncation, ee + oo, eo + oe)


def series_twist(s: ParitySeries, r: int, p: int) -> ParitySeries:
    """Regrade degree i to degree p^r i (the coefficient moves, parity kept)."""
    if r < 0:
        raise ValueError("twist order must be >= 0")
    if r == 0:
        return s.copy()
    out = ParitySeries(s.truncation)
    step = p ** r
    for i in range(0, s.truncation // step + 1):
        out.even[step * i] = s.even[i]
        out.odd[step * i] = s.odd[i]
    return out
