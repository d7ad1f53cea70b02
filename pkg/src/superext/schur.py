"""Schur superalgebras S(m|n, d) and evaluation of functor expressions.

The algebra is Gamma^d End(k^{m|n}) with composition transported through the
identification of its elements with equivariant endomorphisms of the d-th
tensor power.  Basis elements embed as matrices carrying at most d! entries,
so structure constants are never stored; products of basis elements are
sparse matrix composites, and the action matrices of whole-algebra data
(left/right multiplications) are produced by chunked batched matmuls over
the embedded basis.

Functor expressions are symbolic trees with a canonical text form, e.g.
``Pi o Tw0(1) o Pi``, ``S(3) o Tw0(1)``, ``Gamma(3)[V=1|1]``.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass

import numpy as np

from . import multilinear as ml
from .errors import BudgetExceeded, DegreeMismatch, NotHomogeneous, NotAdditiveError
from .ffield import matmul_mod, rref_ip, kernel_basis
from .superspace import SuperSpace

# ---------------------------------------------------------------------------
# functor expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    def degree(self, p):
        raise NotImplementedError

    def text(self):
        raise NotImplementedError

    def __str__(self):
        return self.text()


@dataclass(frozen=True)
class Gamma(Expr):
    d: int

    def degree(self, p):
        return self.d

    def text(self):
        return f"Gamma({self.d})"


@dataclass(frozen=True)
class Sym(Expr):
    d: int

    def degree(self, p):
        return self.d

    def text(self):
        return f"S({self.d})"


@dataclass(frozen=True)
class GammaParam(Expr):
    """Gamma^{d, V} = Gamma^d Hom(V, -), V = k^{m|n}."""

    d: int
    m: int
    n: int

    def degree(self, p):
        return self.d

    def text(self):
        return f"Gamma({self.d})[V={self.m}|{self.n}]"


@dataclass(frozen=True)
class Twist(Expr):
    """I_ell^{(r)}: the parity-ell part of the r-th Frobenius twist."""

    r: int
    ell: int

    def __post_init__(self):
        assert self.r >= 1 and self.ell in (0, 1)

    def degree(self, p):
        return p ** self.r

    def text(self):
        return f"Tw{self.ell}({self.r})"


@dataclass(frozen=True)
class Ident(Expr):
    def degree(self, p):
        return 1

    def text(self):
        return "I"


@dataclass(frozen=True)
class Pi(Expr):
    def degree(self, p):
        return 1

    def text(self):
        return "Pi"


@dataclass(frozen=True)
class PostPi(Expr):
    inner: Expr

    def degree(self, p):
        return self.inner.degree(p)

    def text(self):
        return f"Pi o {_paren(self.inner)}"


@dataclass(frozen=True)
class PrePi(Expr):
    inner: Expr

    def degree(self, p):
        return self.inner.degree(p)

    def text(self):
        return f"{_paren(self.inner)} o Pi"


@dataclass(frozen=True)
class Sum(Expr):
    parts: tuple

    def degree(self, p):
        degs = {f.degree(p) for f in self.parts}
        if len(degs) != 1:
            raise NotHomogeneous(self.text())
        return degs.pop()

    def text(self):
        return " + ".join(_paren(f, "+") for f in self.parts)


@dataclass(frozen=True)
class Tensor(Expr):
    left: Expr
    right: Expr

    def degree(self, p):
        return self.left.degree(p) + self.right.degree(p)

    def text(self):
        return f"{_paren(self.left, '*')} * {_paren(self.right, '*')}"


@dataclass(frozen=True)
class Dual(Expr):
    inner: Expr

    def degree(self, p):
        return self.inner.degree(p)

    def text(self):
        return f"dual({self.inner.text()})"


@dataclass(frozen=True)
class Compose(Expr):
    """outer o inner with inner additive of degree p^s, s >= 1."""

    outer: Expr
    inner: Expr

    def degree(self, p):
        return self.outer.degree(p) * self.inner.degree(p)

    def text(self):
        return f"{_paren(self.outer)} o {_paren(self.inner)}"


@dataclass(frozen=True)
class Param(Expr):
    """Lower parametrisation of a classical functor by a graded space,
    described as a tuple of (degree, parity tag, multiplicity)."""

    inner: Expr
    graded: tuple

    def degree(self, p):
        return self.inner.degree(p)

    def text(self):
        e = ",".join(f"{d}:{t}:{m}" for d, t, m in self.graded)
        return f"param({self.inner.text()}; {e})"


def _paren(f, ctx="o"):
    s = f.text()
    if isinstance(f, Sum):
        return f"({s})"
    if ctx == "*" and isinstance(f, (Tensor,)) is False and " o " in s:
        return f"({s})"
    if ctx == "o" and isinstance(f, (Tensor,)):
        return f"({s})"
    return s


# -- parser ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(o|\+|\*|\(|\)|dual|param|I(?![a-zA-Z])|Pi"
                    r"|Gamma\(\d+\)\[V=\d+\|\d+\]|Gamma\(\d+\)|S\(\d+\)"
                    r"|Tw0\(\d+\)|Tw1\(\d+\))")


def parse(text: str) -> Expr:
    """Parse the canonical text form of a functor expression."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"cannot tokenize {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    out, rest = _parse_sum(tokens)
    if rest:
        raise ValueError(f"trailing tokens: {rest}")
    return out


def _parse_sum(toks):
    left, toks = _parse_tensor(toks)
    parts = [left]
    while toks and toks[0] == "+":
        nxt, toks = _parse_tensor(toks[1:])
        parts.append(nxt)
    return (parts[0] if len(parts) == 1 else Sum(tuple(parts))), toks


def _parse_tensor(toks):
    left, toks = _parse_comp(toks)
    while toks and toks[0] == "*":
        right, toks = _parse_comp(toks[1:])
        left = Tensor(left, right)
    return left, toks


def _parse_comp(toks):
    chain = []
    item, toks = _parse_atom(toks)
    chain.append(item)
    while toks and toks[0] == "o":
        item, toks = _parse_atom(toks[1:])
        chain.append(item)
    expr = chain[-1]
    for f in reversed(chain[:-1]):
        expr = compose(f, expr)
    return expr, toks


def compose(outer: Expr, inner: Expr) -> Expr:
    """Build the composite, mapping Pi factors to Pre/PostPi nodes."""
    if isinstance(inner, Pi):
        return PrePi(outer)
    if isinstance(outer, Pi):
        return PostPi(inner)
    if isinstance(outer, Ident):
        return inner
    if isinstance(inner, Ident):
        return outer
    return Compose(outer, inner)


def _parse_atom(toks):
    if not toks:
        raise ValueError("unexpected end of expression")
    t = toks[0]
    if t == "(":
        inner, rest = _parse_sum(toks[1:])
        if not rest or rest[0] != ")":
            raise ValueError("unbalanced parenthesis")
        return inner, rest[1:]
    if t == "dual":
        if len(toks) < 2 or toks[1] != "(":
            raise ValueError("dual needs parentheses")
        inner, rest = _parse_sum(toks[2:])
        if not rest or rest[0] != ")":
            raise ValueError("unbalanced parenthesis")
        return Dual(inner), rest[1:]
    if t == "I":
        return Ident(), toks[1:]
    if t == "Pi":
        return Pi(), toks[1:]
    m = re.fullmatch(r"Gamma\((\d+)\)\[V=(\d+)\|(\d+)\]", t)
    if m:
        return GammaParam(int(m[1]), int(m[2]), int(m[3])), toks[1:]
    m = re.fullmatch(r"Gamma\((\d+)\)", t)
    if m:
        return Gamma(int(m[1])), toks[1:]
    m = re.fullmatch(r"S\((\d+)\)", t)
    if m:
        return Sym(int(m[1])), toks[1:]
    m = re.fullmatch(r"Tw([01])\((\d+)\)", t)
    if m:
        return Twist(int(m[2]), int(m[1])), toks[1:]
    raise ValueError(f"unexpected token {t}")


# ---------------------------------------------------------------------------
# the Schur superalgebra
# ---------------------------------------------------------------------------

class SchurSuperalgebra:
    """Gamma^d End(k^{m|n}) with the composition product."""

    def __init__(self, p, m, n, d):
        if m + n < 1 or d < 0:
            raise ValueError("need m + n >= 1 and d >= 0")
        self.p = p
        self.m = m
        self.n = n
        self.d = d
        self.space = SuperSpace.kmn(m, n)
        self.vbasis = ml.Basis.of(self.space)
        self.tables = ml.hom_tables(self.vbasis, self.vbasis, d)
        self.basis = self.tables.pbasis
        self.dim = self.basis.dim
        ident = np.zeros(self.vbasis.dim ** 2, np.int64)
        for i in range(self.vbasis.dim):
            ident[i * self.vbasis.dim + i] = 1
        self.unit = ml.dp_vector(self.tables.base, d, ident, p)
        self._gens = None
        self._lock = threading.Lock()

    # -- products -----------------------------------------------------------
    def matrix_of(self, x):
        return self.tables.matrix_of(x, self.p)

    def coords_of(self, M):
        return self.tables.coords_of(M, self.p)

    def multiply(self, x, y):
        """Product of two coordinate vectors (x after y)."""
        M = matmul_mod(self.matrix_of(x), self.matrix_of(y), self.p)
        return self.coords_of(M)

    def _arr(self, i):
        t = self.tables
        sl = slice(t.arr_offsets[i], t.arr_offsets[i + 1])
        pos = t.arr_pos[sl]
        return t.row_code[pos], t.col_code[pos], t.entry_sign[pos]

    def _pos_codes(self, rowcodes, colcodes):
        """Position codes of letter tuples with the given row/col codes."""
        dv = self.vbasis.dim
        L = dv * dv
        r = np.asarray(rowcodes, np.int64).copy()
        c = np.asarray(colcodes, np.int64).copy()
        digits = []
        for _ in range(self.d):
            digits.append((r % dv) * dv + c % dv)
            r //= dv
            c //= dv
        code = np.zeros_like(r)
        for h in reversed(digits):
            code = code * L + h
        return code

    def _embed_coo(self, xs: dict):
        """Embedded sparse matrix of a sparse coordinate dict."""
        t = self.tables
        rows, cols, vals = [], [], []
        for i, a in xs.items():
            sl = slice(t.arr_offsets[i], t.arr_offsets[i + 1])
            pos = t.arr_pos[sl]
            rows.append(t.row_code[pos])
            cols.append(t.col_code[pos])
            vals.append(t.entry_sign[pos].astype(np.int64) * (a % self.p))
        import scipy.sparse as sp
        D = self.vbasis.dim ** self.d
        if not rows:
            return sp.csr_matrix((D, D), dtype=np.int64)
        return sp.csr_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(D, D), dtype=np.int64)

    def _extract_coo(self, P):
        """Sparse coordinates of an equivariant sparse matrix (reads the
        canonical slot of each orbit present)."""
        t = self.tables
        C = P.tocoo()
        v = np.mod(C.data, self.p)
        keep = v != 0
        pos = self._pos_codes(C.row[keep], C.col[keep])
        v = v[keep]
        orb = t.orbit[pos]
        ok = (orb >= 0) & (t.canonical[np.maximum(orb, 0)] == pos)
        vals = (v[ok] * t.entry_sign[pos[ok]]) % self.p
        return {int(o): int(c) for o, c in zip(orb[ok], vals) if c}

    def multiply_basis(self, i, j):
        """Sparse product of two basis elements: {basis index: coeff}."""
        return self.multiply_sparse({i: 1}, {j: 1})

    def multiply_sparse(self, xs: dict, ys: dict):
        """Product of sparse coordinate dicts via the embedded matrices."""
        if not xs or not ys:
            return {}
        return self._extract_coo(self._embed_coo(xs) @ self._embed_coo(ys))

    # -- batched embedded products ------------------------------------------
    def _stack_chunk(self, idx):
        """Embedded basis matrices for the given indices: (k, D, D) int8."""
        t = self.tables
        D = self.vbasis.dim ** self.d
        out = np.zeros((len(idx), D, D), np.int8)
        for a, i in enumerate(idx):
            r, c, s = self._arr(i)
            out[a, r, c] = s
        return out

    def left_mul_matrix(self, x, chunk=512):
        """Matrix of y -> x . y on algebra coordinates."""
        return self._mul_matrix(x, "left", chunk)

    def right_mul_matrix(self, x, chunk=512):
        """Matrix of y -> y . x on algebra coordinates."""
        return self._mul_matrix(x, "right", chunk)

    def _mul_matrix(self, x, side, chunk):
        p = self.p
        t = self.tables
        Mx = self.matrix_of(x).astype(np.float32)
        out = np.empty((self.dim, self.dim), np.int8)
        cr = t.canon_row
        cc = t.canon_col
        cs = t.canon_sign.astype(np.int64)
        for lo in range(0, self.dim, chunk):
            hi = min(lo + chunk, self.dim)
            stack = self._stack_chunk(range(lo, hi)).astype(np.float32)
            if side == "left":
                prod = np.matmul(Mx[None, :, :], stack)
            else:
                prod = np.matmul(stack, Mx[None, :, :])
            vals = prod[:, cr, cc].astype(np.int64)  # (k, dim)
            out[:, lo:hi] = ((vals * cs[None, :]) % p).T.astype(np.int8)
        return out

    # -- generating sets ------------------------------------------------------
    def generating_set(self, seed=0, max_gens=40):
        """A small verified generating set (with the unit adjoined).

        Two random dense elements are tried first; while the span of all
        words under right multiplication falls short (random tuples over a
        small prime field can structurally miss a few one-dimensional
        blocks), the first basis element outside the closure is adjoined.
        The certificate is an exact rank computation.
        """
        with self._lock:
            if self._gens is not None:
                return self._gens
            from . import cache
            ckey = "gens-" + cache.key_hash(
                ["generating_set", self.p, self.m, self.n, self.d, seed])
            hit = cache.load_arrays(ckey)
            if hit is not None:
                self._gens = [hit[k] for k in sorted(hit)]
                return self._gens
            from .ffield import IncrementalRREF
            rng = np.random.default_rng(seed + 977 * self.dim)
            inc = IncrementalRREF(self.p, self.dim)
            inc.add_rows(self.unit[None, :])
            gens = []
            rmats = []

            def close(frontier):
                while frontier.shape[0] and inc.rank < self.dim:
                    new = [matmul_mod(R, frontier.T, self.p).T for R in rmats]
                    frontier = inc.add_rows(np.vstack(new))

            while inc.rank < self.dim:
                if len(gens) >= max_gens:
                    raise RuntimeError("failed to find a generating set")
                if len(gens) < 2:
                    g = rng.integers(0, self.p, self.dim)
                else:
                    g = self._first_outside(inc)
                gens.append(g)
                rmats.append(self.right_mul_matrix(g))
                inc.add_rows(g[None, :] % self.p)
                close(inc.rows())
            self._gens = gens
            return gens

    def _first_outside(self, inc):
        """Unit vector at the first basis index outside the current span."""
        piv = set(int(c) for c in inc.pivots())
        for t in range(self.dim):
            e = np.zeros(self.dim, np.int64)
            e[t] = 1
            if t not in piv or inc.reduce(e[None, :]).any():
                if inc.reduce(e[None, :]).any():
                    return e
        raise AssertionError("span is full")

    def verify_laws(self, n_samples=10_000, seed=0):
        """Exact associativity and unit checks.

        All basis triples when dim <= 200, otherwise n_samples random
        triples.  Returns the number of triples checked; raises on failure.
        """
        for i in range(self.dim):
            u = self.multiply_sparse({i: 1}, _sparse(self.unit))
            if u != _sparse_of_index(i):
                raise AssertionError(f"right unit law fails at {i}")
            u = self.multiply_sparse(_sparse(self.unit), {i: 1})
            if u != _sparse_of_index(i):
                raise AssertionError(f"left unit law fails at {i}")
        checked = 0
        if self.dim <= 200:
            triples = ((i, j, k) for i in range(self.dim)
                       for j in range(self.dim) for k in range(self.dim))
        else:
            rng = np.random.default_rng(seed)
            triples = (tuple(rng.integers(0, self.dim, 3))
                       for _ in range(n_samples))
        for i, j, k in triples:
            ij = self.multiply_basis(i, j)
            jk = self.multiply_basis(j, k)
            lhs = self.multiply_sparse(ij, {k: 1})
            rhs = self.multiply_sparse({i: 1}, jk)
            if lhs != rhs:
                raise AssertionError(f"associativity fails at {(i, j, k)}")
            checked += 1
        return checked


def _sparse(vec):
    return {int(i): int(v) for i, v in enumerate(vec) if v}


def _sparse_of_index(i):
    return {i: 1}


_algebra_cache: dict = {}
_algebra_lock = threading.Lock()


def schur_algebra(p, m, n, d) -> SchurSuperalgebra:
    """Shared cache of constructed algebras, keyed by (p, m, n, d)."""
    key = (p, m, n, d)
    with _algebra_lock:
        alg = _algebra_cache.get(key)
    if alg is None:
        alg = SchurSuperalgebra(p, m, n, d)
        with _algebra_lock:
            _algebra_cache.setdefault(key, alg)
            alg = _algebra_cache[key]
    return alg


def build_schur(m, n, d, p=3) -> SchurSuperalgebra:
    return schur_algebra(p, m, n, d)


# evaluation API lives in _evaluate (it needs the expression classes above)
from ._evaluate import (  # noqa: E402
    TSpace, SuperModule, evaluate, space_eval, map_eval, dim_eval,
)


def hom_superfunctors(F: Expr, G: Expr, m, n, p):
    """Super dimension of the natural transformation space from F to G.

    The even part solves the commutant system over a verified generating
    set; the odd part repeats it with F postcomposed by the parity change.
    Returns (even, odd, faithful) where faithful marks m, n >= degree.
    """
    dF = F.degree(p)
    if dF != G.degree(p):
        raise DegreeMismatch((F.text(), G.text()))
    alg = schur_algebra(p, m, n, dF)
    faithful = m >= dF and n >= dF
    even = _hom_even(evaluate(F, alg), evaluate(G, alg))
    odd = _hom_even(evaluate(PostPi(F), alg), evaluate(G, alg))
    return even, odd, faithful


def _hom_even(MF, MG):
    """dim of even module maps MF -> MG commuting with the generators.

    The first constraint block is solved by elimination; the remaining
    generator parts only refine the (already small) solution space, so each
    is applied to the current kernel basis and the kernel of that small
    system is taken.
    """
    import scipy.sparse as sp
    from .ffield import kernel_basis
    alg = MF.algebra
    p = alg.p
    tM = MF.tags.astype(np.int64)
    tN = MG.tags.astype(np.int64)
    dM, dN = MF.dim, MG.dim
    pair_par = (tN[:, None] ^ tM[None, :]).ravel()
    cols = np.nonzero(pair_par == 0)[0]
    if len(cols) == 0:
        return 0
    K = None
    for (qa, AM), (qb, AN) in zip(MF.gen_parts(), MG.gen_parts()):
        assert qa == qb
        C = (sp.kron(sp.csr_matrix(AN % p), sp.identity(dM, dtype=np.int64,
                                                        format="csr"))
             - sp.kron(sp.identity(dN, dtype=np.int64, format="csr"),
                       sp.csr_matrix((AM % p).T))).tocsr()
        # an even unknown composed with a parity-q generator part lands in
        # parity-q matrix entries
        rows = np.nonzero(pair_par == qa)[0]
        Cq = C[rows][:, cols]
        Cq.data %= p
        if K is None:
            dense = np.ascontiguousarray(Cq.toarray().astype(np.int8))
            K = kernel_basis(dense, p)
        else:
            D = (Cq @ K) % p
            K = matmul_mod(K, kernel_basis(np.asarray(D), p), p)
        if K.shape[1] == 0:
            return 0
    return K.shape[1] if K is not None else len(cols)
