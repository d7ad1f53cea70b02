"""Signed tensor powers, divided/symmetric power bases, and structure maps.

The symmetric group acts on the right of a tensor power of a super space,
with the sign of a transposition given by the product of the parities of the
two letters it swaps.  Divided powers are the invariants of this action,
symmetric powers the coinvariants; both share the combinatorial monomial
basis (an exponent vector on even letters times a strictly increasing tuple
of odd letters).

Working representations:
  * a monomial is a sorted tuple of letter indices;
  * a "position" in the n-th tensor power is an arbitrary tuple of letters,
    encoded as an integer in base L;
  * PowerTables records, for every position, its monomial (orbit) and the
    sign relating it to the sorted representative; HomTables additionally
    carries the Koszul sign of applying an elementary tensor of maps, so
    that invariant elements of a divided power of a Hom space embed as
    genuine matrices between tensor powers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .superspace import SuperSpace

#: cap on L**n when building position tables
MAX_POSITIONS = 4_000_000


# ---------------------------------------------------------------------------
# letter bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Basis:
    """An ordered homogeneous basis: labels plus a parity per letter."""

    labels: tuple
    parities: tuple  # of 0/1 ints

    def __post_init__(self):
        assert len(self.labels) == len(self.parities)

    @classmethod
    def of(cls, space: SuperSpace):
        return cls(space.labels, tuple(space.parities().tolist()))

    @property
    def dim(self):
        return len(self.labels)

    @property
    def sdim(self):
        e = sum(1 for q in self.parities if q == 0)
        return (e, self.dim - e)

    def flip(self):
        return Basis(self.labels, tuple(1 - q for q in self.parities))

    def even_indices(self):
        return [i for i, q in enumerate(self.parities) if q == 0]

    def odd_indices(self):
        return [i for i, q in enumerate(self.parities) if q == 1]


@dataclass(frozen=True)
class HomBasis(Basis):
    """Basis of Hom(source, target): letter i*dim(source)+j is the
    elementary map sending source letter j to target letter i."""

    target: Basis = None
    source: Basis = None

    @classmethod
    def make(cls, source: Basis, target: Basis):
        labels = []
        parities = []
        for i in range(target.dim):
            for j in range(source.dim):
                labels.append((target.labels[i], source.labels[j]))
                parities.append(target.parities[i] ^ source.parities[j])
        return cls(tuple(labels), tuple(parities), target=target, source=source)

    def letter_row(self, h):
        return h // self.source.dim

    def letter_col(self, h):
        return h % self.source.dim


def end_basis(space_basis: Basis) -> HomBasis:
    return HomBasis.make(space_basis, space_basis)


# ---------------------------------------------------------------------------
# monomial bases of divided / symmetric powers
# ---------------------------------------------------------------------------

class PowerBasis:
    """Monomial basis of the n-th divided or symmetric power of a Basis.

    Monomials are listed by ascending number of odd letters; within a block
    the even exponent patterns come in lexicographic order, then the odd
    tuples in lexicographic order.  Monomial parity is (#odd letters) mod 2.
    """

    __slots__ = ("kind", "n", "base", "monomials", "parities", "index")

    def __init__(self, kind, n, base: Basis):
        assert kind in ("gamma", "s")
        self.kind = kind
        self.n = n
        self.base = base
        ev = base.even_indices()
        od = base.odd_indices()
        monos = []
        for b in range(0, min(n, len(od)) + 1):
            a = n - b
            for emul in itertools.combinations_with_replacement(ev, a):
                for otup in itertools.combinations(od, b):
                    monos.append(tuple(sorted(emul + otup)))
        self.monomials = tuple(monos)
        par = np.fromiter(
            (sum(base.parities[t] for t in m) & 1 for m in monos),
            np.int8, len(monos))
        self.parities = par
        self.index = {m: i for i, m in enumerate(monos)}

    @property
    def dim(self):
        return len(self.monomials)

    @property
    def sdim(self):
        o = int(self.parities.sum())
        return (self.dim - o, o)

    def exponents(self, i):
        out = {}
        for t in self.monomials[i]:
            out[t] = out.get(t, 0) + 1
        return out

    def to_superspace(self):
        even = tuple(m for m, q in zip(self.monomials, self.parities) if q == 0)
        odd = tuple(m for m, q in zip(self.monomials, self.parities) if q == 1)
        return SuperSpace(even, odd)


def power_space(kind, n, V: SuperSpace) -> PowerBasis:
    """Monomial basis of the divided (kind='gamma') or symmetric (kind='s')
    n-th power of V."""
    return PowerBasis(kind, n, Basis.of(V))


# ---------------------------------------------------------------------------
# divided / symmetric multiplication
# ---------------------------------------------------------------------------

def _merge_sign(m1, m2, parities):
    """Koszul sign for sorting the concatenation m1|m2 (both sorted).

    Counts pairs of odd letters (x in m1, y in m2) with y < x; a common odd
    letter kills the product.
    """
    o1 = [t for t in m1 if parities[t]]
    o2 = [t for t in m2 if parities[t]]
    if set(o1) & set(o2):
        return 0
    inv = sum(1 for x in o1 for y in o2 if y < x)
    return -1 if inv & 1 else 1


class PowerMultiplication:
    """Structure constants of Gamma^a x Gamma^b -> Gamma^{a+b}
    (or the symmetric analogue, where even letters multiply with
    coefficient 1 instead of a binomial)."""

    def __init__(self, kind, base: Basis, a, b, p):
        self.pa = PowerBasis(kind, a, base)
        self.pb = PowerBasis(kind, b, base)
        self.pout = PowerBasis(kind, a + b, base)
        self.p = p
        self.kind = kind
        self.base = base

    def pair(self, i, j):
        """(output index, coefficient) for basis monomials i, j; coefficient
        0 when the product vanishes."""
        m1 = self.pa.monomials[i]
        m2 = self.pb.monomials[j]
        sign = _merge_sign(m1, m2, self.base.parities)
        if sign == 0:
            return 0, 0
        coeff = sign
        if self.kind == "gamma":
            e1 = self.pa.exponents(i)
            e2 = self.pb.exponents(j)
            for t, x in e1.items():
                if t in e2:
                    coeff *= math.comb(x + e2[t], x)
        out = tuple(sorted(m1 + m2))
        return self.pout.index[out], coeff % self.p

    def multiply(self, xa, xb):
        """Coordinates of the product of two coordinate vectors."""
        out = np.zeros(self.pout.dim, np.int64)
        nza = np.nonzero(xa)[0]
        nzb = np.nonzero(xb)[0]
        for i in nza:
            for j in nzb:
                k, c = self.pair(i, j)
                if c:
                    out[k] = (out[k] + int(xa[i]) * int(xb[j]) * c) % self.p
        return out

    def matrix(self):
        """Full matrix of the multiplication map on the tensor product of
        the two power bases (columns indexed by pairs (i, j), row-major)."""
        A = np.zeros((self.pout.dim, self.pa.dim * self.pb.dim), np.int64)
        for i in range(self.pa.dim):
            for j in range(self.pb.dim):
                k, c = self.pair(i, j)
                if c:
                    A[k, i * self.pb.dim + j] = c
        return A


def dp_vector(base: Basis, k, vec, p):
    """Divided power gamma_k of an even vector, in Gamma^k coordinates.

    The vector must be supported on even letters; the expansion is then
    sum over exponent patterns mu of (prod c^mu) gamma_mu.
    """
    vec = np.asarray(vec, np.int64) % p
    for t in np.nonzero(vec)[0]:
        if base.parities[int(t)]:
            raise ValueError("divided power of a vector with odd components")
    pb = PowerBasis("gamma", k, base)
    out = np.zeros(pb.dim, np.int64)
    support = [int(t) for t in np.nonzero(vec)[0]]
    for emul in itertools.combinations_with_replacement(support, k):
        c = 1
        for t in emul:
            c = (c * int(vec[t])) % p
        out[pb.index[tuple(sorted(emul))]] = c
    return out


def pow_vector_sym(base: Basis, k, vec, p):
    """k-th power of an even vector in the symmetric algebra (multinomials)."""
    vec = np.asarray(vec, np.int64) % p
    for t in np.nonzero(vec)[0]:
        if base.parities[int(t)]:
            raise ValueError("power of a vector with odd components")
    pb = PowerBasis("s", k, base)
    out = np.zeros(pb.dim, np.int64)
    support = [int(t) for t in np.nonzero(vec)[0]]
    for emul in itertools.combinations_with_replacement(support, k):
        counts = {}
        for t in emul:
            counts[t] = counts.get(t, 0) + 1
        c = math.factorial(k)
        for t, e in counts.items():
            c //= math.factorial(e)
        c %= p
        for t, e in counts.items():
            c = (c * pow(int(vec[t]), e, p)) % p
        idx = pb.index[tuple(sorted(emul))]
        out[idx] = (out[idx] + c) % p
    return out


# ---------------------------------------------------------------------------
# position tables
# ---------------------------------------------------------------------------

def _decode_positions(L, n):
    """(L**n, n) array of letter tuples, big-endian."""
    N = L ** n
    if N > MAX_POSITIONS:
        raise BudgetExceeded(f"tensor power too large: {L}^{n} positions")
    codes = np.arange(N, dtype=np.int64)
    cols = []
    for k in range(n - 1, -1, -1):
        cols.append((codes // (L ** k)) % L)
    return np.stack(cols, axis=1)


class PowerTables:
    """Orbit data of the signed right symmetric-group action on positions."""

    def __init__(self, base: Basis, n):
        self.base = base
        self.n = n
        L = base.dim
        self.L = L
        pb = PowerBasis("gamma", n, base)
        self.pbasis = pb
        T = _decode_positions(L, n)
        par = np.asarray(base.parities, np.int8)[T]  # (N, n)
        srt = np.sort(T, axis=1)
        inv = np.zeros(len(T), np.int64)
        bad = np.zeros(len(T), bool)
        for i in range(n):
            for j in range(i + 1, n):
                both_odd = (par[:, i] & par[:, j]).astype(bool)
                inv += ((T[:, i] > T[:, j]) & both_odd)
                bad |= (T[:, i] == T[:, j]) & both_odd
        sign = np.where(bad, 0, np.where(inv & 1, -1, 1)).astype(np.int8)
        # orbit lookup via encoded sorted tuples (invalid positions, i.e.
        # repeated odd letters, carry sign 0 and get orbit -1)
        weights = L ** np.arange(n - 1, -1, -1, dtype=np.int64)
        enc_sorted = srt @ weights
        mono_enc = np.array([sum(t * w for t, w in zip(m, weights))
                             for m in pb.monomials], np.int64)
        if pb.dim:
            order = np.argsort(mono_enc)
            pos_in_sorted = np.clip(np.searchsorted(mono_enc[order], enc_sorted),
                                    0, pb.dim - 1)
            orbit = order[pos_in_sorted].astype(np.int64)
        else:
            orbit = np.full(len(T), -1, np.int64)
        orbit[sign == 0] = -1
        self.positions = T
        self.sign = sign
        self.orbit = orbit
        self.canonical = mono_enc  # canonical position code per monomial
        # arrangement lists grouped by monomial
        ok = np.nonzero(sign != 0)[0]
        by = np.argsort(orbit[ok], kind="stable")
        arr_pos = ok[by]
        counts = np.bincount(orbit[ok], minlength=pb.dim)
        self.arr_offsets = np.concatenate([[0], np.cumsum(counts)])
        self.arr_pos = arr_pos
        self.arr_sign = sign[arr_pos]

    def embed(self, coords):
        """Invariant tensor (vector over positions) for Gamma coordinates."""
        coords = np.asarray(coords, np.int64)
        out = np.zeros(self.L ** self.n, np.int64)
        mask = self.orbit >= 0
        out[mask] = coords[self.orbit[mask]] * self.sign[mask]
        return out

    def extract(self, tensor, p):
        """Gamma coordinates of an invariant tensor (reads canonical slots)."""
        return np.asarray(tensor, np.int64)[self.canonical] % p

    def embed_matrix(self, p):
        """(positions x monomials) embedding matrix."""
        E = np.zeros((self.L ** self.n, self.pbasis.dim), np.int64)
        mask = self.orbit >= 0
        E[np.nonzero(mask)[0], self.orbit[mask]] = self.sign[mask] % p
        return E

    def coinv_projection(self, p):
        """(monomials x positions) coinvariant projection; the transpose of
        the embedding."""
        return self.embed_matrix(p).T % p

    def transposition_matrix(self, i, p):
        """Matrix of the right action of the transposition (i, i+1) on
        positions (an oracle for equivariance tests)."""
        T = self.positions
        tgt = T.copy()
        tgt[:, [i, i + 1]] = tgt[:, [i + 1, i]]
        weights = self.L ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        codes = tgt @ weights
        par = np.asarray(self.base.parities, np.int8)
        s = np.where((par[T[:, i]] & par[T[:, i + 1]]).astype(bool), -1, 1)
        M = np.zeros((len(T), len(T)), np.int64)
        M[codes, np.arange(len(T))] = s % p
        return M


class HomTables(PowerTables):
    """Position tables for a power of a Hom space, with the application
    Koszul sign and row/column codes so invariants embed as matrices."""

    def __init__(self, hom: HomBasis, n):
        super().__init__(hom, n)
        T = self.positions
        src = hom.source
        tgt = hom.target
        rows = T // src.dim          # target letter per slot
        cols = T % src.dim           # source letter per slot
        fpar = np.asarray(hom.parities, np.int8)[T]
        cpar = np.asarray(src.parities, np.int8)[cols]
        # kappa: letter t of the elementary tensor moves past the source
        # letters of slots before it
        kappa = np.zeros(len(T), np.int64)
        for t in range(n):
            for u in range(t):
                kappa += fpar[:, t] * cpar[:, u]
        ksign = np.where(kappa & 1, -1, 1).astype(np.int8)
        self.entry_sign = (self.sign * ksign).astype(np.int8)
        wr = tgt.dim ** np.arange(n - 1, -1, -1, dtype=np.int64)
        wc = src.dim ** np.arange(n - 1, -1, -1, dtype=np.int64)
        self.row_code = rows @ wr
        self.col_code = cols @ wc
        self.nrows = tgt.dim ** n
        self.ncols = src.dim ** n
        self.canon_row = self.row_code[self.canonical]
        self.canon_col = self.col_code[self.canonical]
        self.canon_sign = self.entry_sign[self.canonical]

    def matrix_of(self, coords, p):
        """The equivariant matrix (target power x source power) of an
        element given in Gamma coordinates."""
        coords = np.asarray(coords, np.int64)
        M = np.zeros((self.nrows, self.ncols), np.int64)
        mask = self.orbit >= 0
        idx = np.nonzero(mask)[0]
        M[self.row_code[idx], self.col_code[idx]] = \
            (coords[self.orbit[idx]] * self.entry_sign[idx]) % p
        return M

    def coords_of(self, matrix, p):
        """Gamma coordinates of an equivariant matrix (inverse of matrix_of)."""
        vals = np.asarray(matrix, np.int64)[self.canon_row, self.canon_col]
        return (vals * self.canon_sign) % p


_tables_cache: dict = {}


def power_tables(base: Basis, n) -> PowerTables:
    key = ("pow", base, n)
    t = _tables_cache.get(key)
    if t is None:
        t = PowerTables(base, n)
        _tables_cache[key] = t
    return t


def hom_tables(source: Basis, target: Basis, n) -> HomTables:
    key = ("hom", source, target, n)
    t = _tables_cache.get(key)
    if t is None:
        t = HomTables(HomBasis.make(source, target), n)
        _tables_cache[key] = t
    return t


# ---------------------------------------------------------------------------
# equivariant lift and composition
# ---------------------------------------------------------------------------

class LiftedMap:
    """An element of Gamma^n Hom(V, W) as an equivariant map of tensor
    powers, with its induced maps on divided and symmetric powers."""

    def __init__(self, coords, V: SuperSpace, W: SuperSpace, n, p):
        self.p = p
        self.n = n
        self.V = V
        self.W = W
        bV = Basis.of(V)
        bW = Basis.of(W)
        self.tables = hom_tables(bV, bW, n)
        self.coords = np.asarray(coords, np.int64) % p
        self.tabV = power_tables(bV, n)
        self.tabW = power_tables(bW, n)

    def tensor_matrix(self):
        return self.tables.matrix_of(self.coords, self.p)

    def on_gamma(self):
        """Induced map Gamma^n V -> Gamma^n W on monomial bases."""
        M = self.tensor_matrix()
        E = self.tabV.embed_matrix(self.p)
        rows = M[self.tabW.canonical, :]
        return (rows @ E) % self.p

    def on_s(self):
        """Induced map S^n V -> S^n W on monomial bases."""
        M = self.tensor_matrix()
        P = self.tabW.coinv_projection(self.p)
        cols = M[:, self.tabV.canonical]
        return (P @ cols) % self.p


def equivariant_lift(coords, V, W, n, p) -> LiftedMap:
    return LiftedMap(coords, V, W, n, p)


def compose_gamma_hom(x_coords, y_coords, U, V, W, n, p):
    """Composition Gamma^n Hom(V,W) x Gamma^n Hom(U,V) -> Gamma^n Hom(U,W)
    computed through the equivariant matrices."""
    tx = hom_tables(Basis.of(V), Basis.of(W), n)
    ty = hom_tables(Basis.of(U), Basis.of(V), n)
    tz = hom_tables(Basis.of(U), Basis.of(W), n)
    M = tx.matrix_of(x_coords, p) @ ty.matrix_of(y_coords, p)
    return tz.coords_of(M % p, p)


# ---------------------------------------------------------------------------
# the multiplication cokernel Q_d
# ---------------------------------------------------------------------------

@dataclass
class QFunctorResult:
    d: int
    input: SuperSpace
    cokernel_sdim: tuple
    cokernel_monomials: tuple
    quotient_map: np.ndarray   # (cokernel dim x dim Gamma^d) over F_p


def gamma_multiplication_matrix(d, V: SuperSpace, p):
    """Matrix of sum_{k=1}^{d-1} Gamma^k V (x) Gamma^{d-k} V -> Gamma^d V."""
    base = Basis.of(V)
    target = PowerBasis("gamma", d, base)
    blocks = []
    for k in range(1, d):
        blocks.append(PowerMultiplication("gamma", base, k, d - k, p).matrix())
    if blocks:
        return np.hstack(blocks) % p, target
    return np.zeros((target.dim, 0), np.int64), target


def gamma_multiplication_and_Q(d, V: SuperSpace, p) -> QFunctorResult:
    """Cokernel of the divided-power multiplication map, with parity."""
    from . import ffield
    A, target = gamma_multiplication_matrix(d, V, p)
    work = np.ascontiguousarray(A.T.copy())
    piv = ffield.rref_ip(work, p)
    lead = [int(c) for c in piv]
    comp = [i for i in range(target.dim) if i not in set(lead)]
    # quotient map: reduce modulo the echelon rows of the image, keep the
    # complement coordinates: q(x)_i = x[comp_i] - sum_r x[lead_r] work[r, comp_i]
    Q = np.zeros((len(comp), target.dim), np.int64)
    Q[np.arange(len(comp)), comp] = 1
    for r, c in enumerate(lead):
        Q[:, c] = (-work[r, comp]) % p
    even = sum(1 for i in comp if target.parities[i] == 0)
    odd = len(comp) - even
    return QFunctorResult(d, V, (even, odd),
                          tuple(target.monomials[i] for i in comp), Q % p)


# ---------------------------------------------------------------------------
# Frobenius twist structure map
# ---------------------------------------------------------------------------

def frobenius_structure(r, V: SuperSpace, W: SuperSpace, p):
    """The map Gamma^{p^r} Hom(V, W) -> Hom(V^{(r)}, W^{(r)}).

    Sends the divided power concentrated on a single even letter to that
    letter and every other monomial to zero, so the image lies in the even
    part of the target Hom space.
    """
    d = p ** r
    hom = HomBasis.make(Basis.of(V), Basis.of(W))
    pb = PowerBasis("gamma", d, hom)
    M = np.zeros((hom.dim, pb.dim), np.int64)
    for h in range(hom.dim):
        if hom.parities[h] == 0:
            mono = tuple([h] * d)
            M[h, pb.index[mono]] = 1
    return M, pb, hom


# ---------------------------------------------------------------------------
# super transpose (Kuhn duality at the matrix level)
# ---------------------------------------------------------------------------

def super_transpose(M, row_par, col_par, p):
    """Dual of a map f: X -> Y on dual bases.

    M is (dim Y x dim X) with row parities row_par (of Y) and column
    parities col_par (of X); the result is (dim X x dim Y), the matrix of
    f^dual: Y* -> X* under <f^dual(eta), x> = (-1)^{|f||eta|} <eta, f(x)>.
    """
    row_par = np.asarray(row_par, np.int8)
    col_par = np.asarray(col_par, np.int8)
    sign_exp = (col_par[:, None] ^ row_par[None, :]) & row_par[None, :]
    sign = np.where(sign_exp & 1, -1, 1)
    return (np.asarray(M, np.int64).T * sign) % p


# ---------------------------------------------------------------------------
# brute force oracles (test support)
# ---------------------------------------------------------------------------

def invariants_dim_bruteforce(V: SuperSpace, n, p):
    """dim of invariants of the signed action on the n-th tensor power,
    by stacking (R_sigma - 1) for the transposition generators."""
    from . import ffield
    tab = power_tables(Basis.of(V), n)
    N = V.dim ** n
    if n <= 1:
        return N
    rows = []
    for i in range(n - 1):
        rows.append((tab.transposition_matrix(i, p) - np.eye(N, dtype=np.int64)) % p)
    A = np.vstack(rows)
    return N - ffield.rank_mod(A, p)


def coinvariants_dim_bruteforce(V: SuperSpace, n, p):
    """dim of coinvariants: N minus the rank of the span of (x sigma - x)."""
    from . import ffield
    tab = power_tables(Basis.of(V), n)
    N = V.dim ** n
    if n <= 1:
        return N
    cols = []
    for i in range(n - 1):
        cols.append((tab.transposition_matrix(i, p) - np.eye(N, dtype=np.int64)) % p)
    A = np.hstack(cols)
    return N - ffield.rank_mod(A, p)
