"""Evaluation of functor expressions: spaces, single-morphism images, and
supermodule structures over Schur superalgebras.

Three entry points:
  space_eval(expr, ts, p)          the evaluated tagged space
  map_eval(expr, f, src, tgt, p)   the matrix of the functor on one even map
  evaluate(expr, algebra)          a SuperModule with an action routine

A TSpace separates the two roles a parity can play: `basis.parities` drive
every Koszul sign (zero throughout classical evaluations), while `tags`
carry the bookkeeping parity of the value (what the super dimension
reports).  For honest super evaluation the two coincide.  Optional integer
`weights` track parametrisation gradings.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import multilinear as ml
from . import schur as sc
from .errors import DegreeMismatch, NotAdditiveError
from .ffield import matmul_mod
from .superspace import SuperSpace


@dataclass(frozen=True)
class TSpace:
    basis: ml.Basis
    tags: tuple
    weights: tuple = None

    @classmethod
    def of_super(cls, V: SuperSpace):
        b = ml.Basis.of(V)
        return cls(b, b.parities)

    @property
    def dim(self):
        return self.basis.dim

    @property
    def sdim(self):
        o = sum(1 for t in self.tags if t & 1)
        return (self.dim - o, o)

    def flip(self):
        return TSpace(self.basis.flip(), tuple(1 - t for t in self.tags),
                      self.weights)

    def dual(self):
        b = ml.Basis(tuple(("*", x) for x in self.basis.labels),
                     self.basis.parities)
        return TSpace(b, self.tags, self.weights)

    def is_classical(self):
        return not any(self.basis.parities)


def _mono_space(kind, d, ts: TSpace) -> TSpace:
    pb = ml.PowerBasis(kind, d, ts.basis)
    tags = tuple(int(sum(ts.tags[t] for t in m) & 1) for m in pb.monomials)
    weights = None
    if ts.weights is not None:
        weights = tuple(int(sum(ts.weights[t] for t in m)) for m in pb.monomials)
    par = tuple(int(q) for q in pb.parities)
    basis = ml.Basis(pb.monomials, par)
    return TSpace(basis, tags, weights)


def _hom_tspace(X: SuperSpace, ts: TSpace) -> TSpace:
    """Tagged space of Hom(X, V) for a standard super X."""
    bX = ml.Basis.of(X)
    hb = ml.HomBasis.make(bX, ts.basis)
    tags = tuple(ts.tags[h // bX.dim] ^ bX.parities[h % bX.dim]
                 for h in range(hb.dim))
    return TSpace(ml.Basis(hb.labels, hb.parities), tags)


def _twist_space(r, ell, ts: TSpace) -> TSpace:
    idx = [i for i, q in enumerate(ts.basis.parities) if q == ell]
    labels = tuple(("tw", r, ts.basis.labels[i]) for i in idx)
    par = tuple(ts.basis.parities[i] for i in idx)
    tags = tuple(ts.tags[i] for i in idx)
    weights = None
    if ts.weights is not None:
        weights = tuple(ts.weights[i] for i in idx)  # caller scales by p^r
    return TSpace(ml.Basis(labels, par), tags, weights)


def space_eval(expr, ts: TSpace, p) -> TSpace:
    E = sc
    if isinstance(expr, E.Gamma):
        return _mono_space("gamma", expr.d, ts)
    if isinstance(expr, E.Sym):
        return _mono_space("s", expr.d, ts)
    if isinstance(expr, E.GammaParam):
        hts = _hom_tspace(SuperSpace.kmn(expr.m, expr.n), ts)
        return _mono_space("gamma", expr.d, hts)
    if isinstance(expr, E.Twist):
        out = _twist_space(expr.r, expr.ell, ts)
        if out.weights is not None:
            out = TSpace(out.basis, out.tags,
                         tuple(w * p ** expr.r for w in out.weights))
        return out
    if isinstance(expr, E.Ident):
        return ts
    if isinstance(expr, E.Pi):
        return ts.flip()
    if isinstance(expr, E.PostPi):
        return space_eval(expr.inner, ts, p).flip()
    if isinstance(expr, E.PrePi):
        return space_eval(expr.inner, ts.flip(), p)
    if isinstance(expr, E.Sum):
        parts = [space_eval(f, ts, p) for f in expr.parts]
        labels = tuple((k, x) for k, part in enumerate(parts)
                       for x in part.basis.labels)
        par = tuple(q for part in parts for q in part.basis.parities)
        tags = tuple(t for part in parts for t in part.tags)
        weights = None
        if all(part.weights is not None for part in parts):
            weights = tuple(w for part in parts for w in part.weights)
        return TSpace(ml.Basis(labels, par), tags, weights)
    if isinstance(expr, E.Tensor):
        a = space_eval(expr.left, ts, p)
        b = space_eval(expr.right, ts, p)
        labels = tuple((x, y) for x in a.basis.labels for y in b.basis.labels)
        par = tuple(qa ^ qb for qa in a.basis.parities
                    for qb in b.basis.parities)
        tags = tuple(ta ^ tb for ta in a.tags for tb in b.tags)
        weights = None
        if a.weights is not None and b.weights is not None:
            weights = tuple(wa + wb for wa in a.weights for wb in b.weights)
        return TSpace(ml.Basis(labels, par), tags, weights)
    if isinstance(expr, E.Dual):
        inner = space_eval(expr.inner, ts.dual(), p)
        return TSpace(ml.Basis(tuple(("#", x) for x in inner.basis.labels),
                               inner.basis.parities), inner.tags, inner.weights)
    if isinstance(expr, E.Compose):
        W = _inner_additive_space(expr.inner, ts, p)
        return space_eval(expr.outer, W, p)
    if isinstance(expr, E.Param):
        return space_eval(expr.inner, _param_space(expr.graded, ts), p)
    raise TypeError(type(expr))


def _param_space(graded, ts: TSpace) -> TSpace:
    """Basis of E (x) V with degree/tag data from the parameter."""
    labels = []
    par = []
    tags = []
    weights = []
    vw = ts.weights if ts.weights is not None else (0,) * ts.dim
    for (deg, tag, mult) in graded:
        for c in range(mult):
            for j in range(ts.dim):
                labels.append((deg, tag, c, ts.basis.labels[j]))
                par.append(ts.basis.parities[j])
                tags.append((tag + ts.tags[j]) & 1)
                weights.append(deg + vw[j])
    return TSpace(ml.Basis(tuple(labels), tuple(par)), tuple(tags),
                  tuple(weights))


def _inner_additive_space(inner, ts: TSpace, p) -> TSpace:
    """Evaluated space of an additive functor, as a classical tagged space.

    The inner functor is classified into indecomposable twist summands; the
    resulting space has all Koszul parities zero and carries the honest
    parity in the tags.
    """
    from .additive import classify_additive
    cls = classify_additive(inner, p)
    if cls.r < 1:
        raise NotAdditiveError(
            "composition needs an inner additive functor of degree >= p")
    e, o = ts.sdim  # by tags: counts of even/odd tagged basis vectors
    labels = []
    tags = []
    for kind, mult in enumerate(cls.mult):
        block = e if kind in (0, 1) else o
        for c in range(mult):
            for j in range(block):
                labels.append(("A", kind, c, j))
                tags.append(kind & 1)
    return TSpace(ml.Basis(tuple(labels), (0,) * len(labels)), tuple(tags))


# ---------------------------------------------------------------------------
# single-morphism images
# ---------------------------------------------------------------------------

_mult_cache: dict = {}


def _mult(kind, base, a, b, p):
    key = (kind, base, a, b, p)
    m = _mult_cache.get(key)
    if m is None:
        m = ml.PowerMultiplication(kind, base, a, b, p)
        _mult_cache[key] = m
    return m


def _power_map(kind, d, f, src: ml.Basis, tgt: ml.Basis, p):
    """Matrix of the d-th divided/symmetric power of an even map f."""
    pb_src = ml.PowerBasis(kind, d, src)
    pb_tgt = ml.PowerBasis(kind, d, tgt)
    out = np.zeros((pb_tgt.dim, pb_src.dim), np.int64)
    f = np.asarray(f, np.int64) % p
    for col, mono in enumerate(pb_src.monomials):
        acc = np.ones(1, np.int64)
        deg = 0
        i = 0
        ok = True
        while i < len(mono):
            ell = mono[i]
            e = 1
            while i + e < len(mono) and mono[i + e] == ell:
                e += 1
            i += e
            w = f[:, ell]
            if src.parities[ell] == 0:
                term = (ml.dp_vector(tgt, e, w, p) if kind == "gamma"
                        else ml.pow_vector_sym(tgt, e, w, p))
            else:
                term = w.copy()
            if not term.any():
                ok = False
                break
            if deg == 0:
                acc = term
            else:
                acc = _mult(kind, tgt, deg, e, p).multiply(acc, term)
            deg += e
            if not acc.any():
                ok = False
                break
        if ok and deg == d:
            out[:, col] = acc
        elif ok and d == 0:
            out[:, col] = acc
    return out


def map_eval(expr, f, src: TSpace, tgt: TSpace, p):
    """Matrix of F applied to (the divided power of) one even map f."""
    E = sc
    f = np.asarray(f, np.int64) % p
    if isinstance(expr, E.Gamma):
        return _power_map("gamma", expr.d, f, src.basis, tgt.basis, p)
    if isinstance(expr, E.Sym):
        return _power_map("s", expr.d, f, src.basis, tgt.basis, p)
    if isinstance(expr, E.GammaParam):
        X = SuperSpace.kmn(expr.m, expr.n)
        lf = np.kron(f, np.eye(X.dim, dtype=np.int64))
        hsrc = _hom_tspace(X, src)
        htgt = _hom_tspace(X, tgt)
        return _power_map("gamma", expr.d, lf, hsrc.basis, htgt.basis, p)
    if isinstance(expr, E.Twist):
        si = [i for i, q in enumerate(src.basis.parities) if q == expr.ell]
        ti = [i for i, q in enumerate(tgt.basis.parities) if q == expr.ell]
        return f[np.ix_(ti, si)]
    if isinstance(expr, E.Ident) or isinstance(expr, E.Pi):
        return f.copy()
    if isinstance(expr, E.PostPi):
        return map_eval(expr.inner, f, src, tgt, p)
    if isinstance(expr, E.PrePi):
        return map_eval(expr.inner, f, src.flip(), tgt.flip(), p)
    if isinstance(expr, E.Sum):
        blocks = [map_eval(g, f, src, tgt, p) for g in expr.parts]
        rows = sum(b.shape[0] for b in blocks)
        cols = sum(b.shape[1] for b in blocks)
        out = np.zeros((rows, cols), np.int64)
        r = c = 0
        for b in blocks:
            out[r:r + b.shape[0], c:c + b.shape[1]] = b
            r += b.shape[0]
            c += b.shape[1]
        return out
    if isinstance(expr, E.Tensor):
        return np.kron(map_eval(expr.left, f, src, tgt, p),
                       map_eval(expr.right, f, src, tgt, p)) % p
    if isinstance(expr, E.Dual):
        fd = ml.super_transpose(f, tgt.basis.parities, src.basis.parities, p)
        inner = map_eval(expr.inner, fd, tgt.dual(), src.dual(), p)
        sF = space_eval(expr.inner, src.dual(), p)
        tF = space_eval(expr.inner, tgt.dual(), p)
        # inner: F(tgt*) -> F(src*); its dual runs F#(src) -> F#(tgt)
        return ml.super_transpose(inner, sF.basis.parities, tF.basis.parities, p)
    if isinstance(expr, E.Compose):
        Af, Wsrc, Wtgt = _inner_additive_map(expr.inner, f, src, tgt, p)
        return map_eval(expr.outer, Af, Wsrc, Wtgt, p)
    if isinstance(expr, E.Param):
        esrc = _param_space(expr.graded, src)
        etgt = _param_space(expr.graded, tgt)
        ne = sum(m for _, _, m in expr.graded)
        lf = np.kron(np.eye(ne, dtype=np.int64), f)
        return map_eval(expr.inner, lf, esrc, etgt, p)
    raise TypeError(type(expr))


def _inner_additive_map(inner, f, src: TSpace, tgt: TSpace, p):
    """Image of one even map under an additive functor, as a block-diagonal
    even map between the classical tagged value spaces."""
    from .additive import classify_additive
    cls = classify_additive(inner, p)
    Wsrc = _inner_additive_space(inner, src, p)
    Wtgt = _inner_additive_space(inner, tgt, p)
    se = [i for i, q in enumerate(src.basis.parities) if q == 0]
    so = [i for i, q in enumerate(src.basis.parities) if q == 1]
    te = [i for i, q in enumerate(tgt.basis.parities) if q == 0]
    to = [i for i, q in enumerate(tgt.basis.parities) if q == 1]
    bee = f[np.ix_(te, se)]
    boo = f[np.ix_(to, so)]
    blocks = []
    for kind, mult in enumerate(cls.mult):
        blk = bee if kind in (0, 1) else boo
        blocks.extend([blk] * mult)
    out = np.zeros((Wtgt.dim, Wsrc.dim), np.int64)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out, Wsrc, Wtgt


def dim_eval(expr, V: SuperSpace, p):
    """Super dimension (by tags) of the evaluation at a standard space."""
    return space_eval(expr, TSpace.of_super(V), p).sdim


# ---------------------------------------------------------------------------
# supermodules
# ---------------------------------------------------------------------------

class SuperModule:
    """A module over a Schur superalgebra with an exact action routine."""

    def __init__(self, algebra, expr, node):
        self.algebra = algebra
        self.expr = expr
        self._node = node
        self.space = node.ts
        self.tags = np.array(node.ts.tags, np.int8)
        self.dim = node.ts.dim
        self._gen_parts = None

    @property
    def sdim(self):
        return self.space.sdim

    def act(self, x):
        """Matrix of the action of the algebra element with coordinates x."""
        return self._node.act(np.asarray(x, np.int64) % self.algebra.p)

    def cover_columns(self, v):
        """(dim x dim A) matrix whose theta-column is act(basis theta) @ v."""
        return self._node.cover_columns(np.asarray(v, np.int64))

    def gen_parts(self):
        """Homogeneous parts of the verified generators: [(parity, matrix)].

        Splitting each generator by monomial parity keeps the commutant
        equations parity-homogeneous.
        """
        if self._gen_parts is None:
            alg = self.algebra
            par = alg.basis.parities
            parts = []
            for g in alg.generating_set():
                g = np.asarray(g, np.int64) % alg.p
                for q in (0, 1):
                    xq = np.where(par == q, g, 0)
                    if xq.any():
                        parts.append((q, self.act(xq)))
            self._gen_parts = parts
        return self._gen_parts

    def verify_action(self, n_pairs=100, seed=0):
        """act(a b) = act(a) act(b) on generator pairs and random pairs."""
        alg = self.algebra
        p = alg.p
        rng = np.random.default_rng(seed)
        gens = alg.generating_set()
        pairs = [(a, b) for a in gens for b in gens]
        pairs += [(rng.integers(0, p, alg.dim), rng.integers(0, p, alg.dim))
                  for _ in range(n_pairs)]
        for a, b in pairs:
            ab = alg.multiply(a, b)
            lhs = self.act(ab)
            rhs = matmul_mod(self.act(a), self.act(b), p)
            if not np.array_equal(lhs, rhs):
                raise AssertionError("action law fails")
        u = self.act(alg.unit)
        if not np.array_equal(u, np.eye(self.dim, dtype=np.int64)):
            raise AssertionError("unit does not act as identity")
        return len(pairs)


class _Node:
    """Action node; ts is the evaluated tagged space."""

    def __init__(self, alg, ts):
        self.alg = alg
        self.ts = ts

    def act(self, x):
        raise NotImplementedError

    def cover_columns(self, v):
        # generic fallback: one sparse basis action per column
        alg = self.alg
        out = np.zeros((self.ts.dim, alg.dim), np.int64)
        e = np.zeros(alg.dim, np.int64)
        for t in range(alg.dim):
            e[t] = 1
            out[:, t] = self.act(e) @ v % alg.p
            e[t] = 0
        return out


class _GammaNode(_Node):
    def __init__(self, alg, ts, d):
        super().__init__(alg, ts)
        self.d = d
        self.tab = ml.power_tables(alg.vbasis, d)
        self.emb = self.tab.embed_matrix(alg.p)  # positions x monomials
        # canonical-row lookup: V-power code -> monomial index or -1
        self.row_lookup = np.full(alg.vbasis.dim ** d, -1, np.int64)
        self.row_lookup[self.tab.canonical] = np.arange(self.tab.pbasis.dim)

    def act(self, x):
        M = self.alg.matrix_of(x)
        return matmul_mod(M[self.tab.canonical, :], self.emb, self.alg.p)

    def cover_columns(self, v):
        alg = self.alg
        t = alg.tables
        w = self.tab.embed(v) % alg.p
        out = np.zeros((self.ts.dim, alg.dim), np.int64)
        theta = np.repeat(np.arange(alg.dim),
                          np.diff(t.arr_offsets))
        rows = self.row_lookup[t.row_code[t.arr_pos]]
        keep = rows >= 0
        np.add.at(out, (rows[keep], theta[keep]),
                  t.entry_sign[t.arr_pos[keep]].astype(np.int64)
                  * w[t.col_code[t.arr_pos[keep]]])
        return out % alg.p


class _SymNode(_Node):
    def __init__(self, alg, ts, d):
        super().__init__(alg, ts)
        self.d = d
        self.tab = ml.power_tables(alg.vbasis, d)
        self.proj = self.tab.coinv_projection(alg.p)

    def act(self, x):
        M = self.alg.matrix_of(x)
        return matmul_mod(self.proj, M[:, self.tab.canonical], self.alg.p)

    def cover_columns(self, v):
        alg = self.alg
        t = alg.tables
        # section of v: place coordinates at canonical position codes
        w = np.zeros(alg.vbasis.dim ** self.d, np.int64)
        w[self.tab.canonical] = v % alg.p
        out = np.zeros((self.ts.dim, alg.dim), np.int64)
        theta = np.repeat(np.arange(alg.dim), np.diff(t.arr_offsets))
        rows = t.row_code[t.arr_pos]
        orb = self.tab.orbit[rows]
        keep = orb >= 0
        np.add.at(out, (orb[keep], theta[keep]),
                  t.entry_sign[t.arr_pos[keep]].astype(np.int64)
                  * self.tab.sign[rows[keep]].astype(np.int64)
                  * w[t.col_code[t.arr_pos[keep]]])
        return out % alg.p


class _GammaParamNode(_Node):
    def __init__(self, alg, ts, d, X: SuperSpace):
        super().__init__(alg, ts)
        self.d = d
        self.X = X
        self.htab = ml.hom_tables(ml.Basis.of(X), alg.vbasis, d)

    def cover_columns(self, v):
        alg = self.alg
        p = alg.p
        t = alg.tables
        h = self.htab
        W = h.matrix_of(v, p)  # embedded module element, V^d x X^d
        dim = self.ts.dim
        out = np.zeros((dim, alg.dim), np.int64)
        # group module monomials by their canonical row code
        order = np.argsort(h.canon_row, kind="stable")
        srows = h.canon_row[order]
        theta = np.repeat(np.arange(alg.dim), np.diff(t.arr_offsets))
        pos = t.arr_pos
        lo = np.searchsorted(srows, t.row_code[pos])
        hi = np.searchsorted(srows, t.row_code[pos], side="right")
        for e in range(len(pos)):
            if lo[e] == hi[e]:
                continue
            nus = order[lo[e]:hi[e]]
            vals = (int(t.entry_sign[pos[e]])
                    * W[t.col_code[pos[e]], h.canon_col[nus]]
                    * h.canon_sign[nus])
            out[nus, theta[e]] += vals
        return out % p

    def act(self, x, chunk=2048):
        alg = self.alg
        p = alg.p
        h = self.htab
        Mx = alg.matrix_of(x).astype(np.float32)
        dim = self.ts.dim
        out = np.empty((dim, dim), np.int64)
        cs = h.canon_sign.astype(np.int64)
        for lo in range(0, dim, chunk):
            hi = min(lo + chunk, dim)
            stack = np.zeros((hi - lo, h.nrows, h.ncols), np.int8)
            for a, i in enumerate(range(lo, hi)):
                sl = slice(h.arr_offsets[i], h.arr_offsets[i + 1])
                pos = h.arr_pos[sl]
                stack[a, h.row_code[pos], h.col_code[pos]] = h.entry_sign[pos]
            prod = np.matmul(Mx[None, :, :], stack.astype(np.float32))
            vals = prod[:, h.canon_row, h.canon_col].astype(np.int64)
            out[:, lo:hi] = ((vals * cs[None, :]) % p).T
        return out


class _TwistNode(_Node):
    def __init__(self, alg, ts, r, ell):
        super().__init__(alg, ts)
        p = alg.p
        dv = alg.vbasis.dim
        idx = [i for i, q in enumerate(alg.vbasis.parities) if q == ell]
        self.idx = idx
        conc = np.zeros((len(idx), len(idx)), np.int64)
        for a, i in enumerate(idx):
            for b, j in enumerate(idx):
                h = i * dv + j
                conc[a, b] = alg.basis.index[tuple([h] * alg.d)]
        self.conc = conc

    def act(self, x):
        return x[self.conc] % self.alg.p

    def cover_columns(self, v):
        alg = self.alg
        out = np.zeros((len(self.idx), alg.dim), np.int64)
        for b in range(len(self.idx)):
            out[np.arange(len(self.idx)), self.conc[:, b]] = v[b] % alg.p
        return out


class _IdentNode(_Node):
    """Degree-one evaluation; the basis of the algebra lists even letters
    before odd ones, so indexing goes through the monomial index."""

    def __init__(self, alg, ts):
        super().__init__(alg, ts)
        dv = alg.vbasis.dim
        self.letter_idx = np.array(
            [[alg.basis.index[(i * dv + j,)] for j in range(dv)]
             for i in range(dv)], np.int64)

    def act(self, x):
        return x[self.letter_idx] % self.alg.p

    def cover_columns(self, v):
        alg = self.alg
        dv = alg.vbasis.dim
        out = np.zeros((dv, alg.dim), np.int64)
        for i in range(dv):
            for j in range(dv):
                out[i, self.letter_idx[i, j]] = v[j] % alg.p
        return out


class _PiNode(_IdentNode):
    def _sign(self):
        par = np.asarray(self.alg.vbasis.parities, np.int8)
        return np.where((par[:, None] ^ par[None, :]) & 1, -1, 1)

    def act(self, x):
        return (x[self.letter_idx] * self._sign()) % self.alg.p

    def cover_columns(self, v):
        alg = self.alg
        dv = alg.vbasis.dim
        sign = self._sign()
        out = np.zeros((dv, alg.dim), np.int64)
        for i in range(dv):
            for j in range(dv):
                out[i, self.letter_idx[i, j]] = sign[i, j] * v[j] % alg.p
        return out


class _PostPiNode(_Node):
    """Pi after F: flipped value space, sign on odd algebra elements."""

    def __init__(self, alg, ts, inner):
        super().__init__(alg, ts)
        self.inner = inner
        self.par = alg.basis.parities.astype(np.int64)

    def act(self, x):
        signed = np.where(self.par & 1, -x, x) % self.alg.p
        return self.inner.act(signed)

    def cover_columns(self, v):
        cov = self.inner.cover_columns(v)
        sign = np.where(self.par & 1, -1, 1)
        return (cov * sign[None, :]) % self.alg.p


class _PreFlipNode(_Node):
    """F after Pi: evaluate F in the flipped context; the incoming element
    picks up one sign per odd letter, i.e. the monomial parity."""

    def __init__(self, alg, ts, flipped_alg, inner):
        super().__init__(alg, ts)
        self.flipped = flipped_alg
        self.inner = inner
        self.par = alg.basis.parities.astype(np.int64)

    def act(self, x):
        signed = np.where(self.par & 1, -x, x) % self.alg.p
        return self.inner.act(signed)

    def cover_columns(self, v):
        cov = self.inner.cover_columns(v)
        sign = np.where(self.par & 1, -1, 1)
        return (cov * sign[None, :]) % self.alg.p


class _SumNode(_Node):
    def __init__(self, alg, ts, parts):
        super().__init__(alg, ts)
        self.parts = parts

    def act(self, x):
        blocks = [n.act(x) for n in self.parts]
        out = np.zeros((self.ts.dim, self.ts.dim), np.int64)
        r = 0
        for b in blocks:
            out[r:r + b.shape[0], r:r + b.shape[1]] = b
            r += b.shape[0]
        return out

    def cover_columns(self, v):
        out = []
        r = 0
        for n in self.parts:
            out.append(n.cover_columns(v[r:r + n.ts.dim]))
            r += n.ts.dim
        return np.vstack(out) % self.alg.p


class _TensorNode(_Node):
    def __init__(self, alg, ts, left, right, d1, d2):
        super().__init__(alg, ts)
        self.left = left
        self.right = right
        p = alg.p
        a1 = left.alg
        a2 = right.alg
        # coproduct lookup: the coefficient of gamma_mu1 (x) gamma_mu2 in the
        # restriction of x is the sorting sign times x[orbit], both read at
        # the concatenated canonical position (restriction of invariant
        # vectors; the matrix-embedding kappa does not enter here)
        L = alg.vbasis.dim ** 2
        enc1 = a1.tables.canonical
        enc2 = a2.tables.canonical
        big = enc1[:, None] * (L ** d2) + enc2[None, :]
        self.orb = alg.tables.orbit[big]
        self.sig = alg.tables.sign[big].astype(np.int64)
        self.par2 = a2.basis.parities
        self._tab1 = None
        self._tab2 = None

    def _tables(self):
        if self._tab1 is None:
            a1 = self.left.alg
            a2 = self.right.alg
            e = np.zeros(a1.dim, np.int64)
            t1 = []
            for i in range(a1.dim):
                e[i] = 1
                t1.append(self.left.act(e))
                e[i] = 0
            e = np.zeros(a2.dim, np.int64)
            t2 = []
            for i in range(a2.dim):
                e[i] = 1
                t2.append(self.right.act(e))
                e[i] = 0
            self._tab1 = t1
            self._tab2 = t2
        return self._tab1, self._tab2

    def act(self, x):
        alg = self.alg
        p = alg.p
        t1, t2 = self._tables()
        C = (self.sig * np.where(self.orb >= 0, x[np.maximum(self.orb, 0)], 0)) % p
        dl = self.left.ts.dim
        dr = self.right.ts.dim
        # Koszul sign for passing the second tensor factor over a value of
        # the first; driven by the computational parities, so it vanishes in
        # classical evaluations
        parl = np.array(self.left.ts.basis.parities, np.int64)
        colsign = np.where(parl & 1, -1, 1)
        out = np.zeros((dl * dr, dl * dr), np.int64)
        for mu1 in range(C.shape[0]):
            row = C[mu1]
            nz = np.nonzero(row)[0]
            if not len(nz):
                continue
            even = np.zeros((dr, dr), np.int64)
            odd = np.zeros((dr, dr), np.int64)
            for mu2 in nz:
                if self.par2[mu2] & 1:
                    odd += int(row[mu2]) * t2[mu2]
                else:
                    even += int(row[mu2]) * t2[mu2]
            A1 = t1[mu1]
            if even.any():
                out += np.kron(A1, even % p)
            if odd.any():
                out += np.kron(A1 * colsign[None, :], odd % p)
        return out % p


class _DualNode(_Node):
    def __init__(self, alg, ts, dual_alg, inner, inner_ts):
        super().__init__(alg, ts)
        self.dual_alg = dual_alg
        self.inner = inner
        self.inner_par = np.array(inner_ts.basis.parities, np.int8)

    def _dual_coords(self, x):
        """Coordinates of the super transpose over the dual context."""
        alg = self.alg
        p = alg.p
        M = alg.matrix_of(x)
        t = alg.tables
        par = np.zeros(t.nrows, np.int8)
        # parity of a tensor-power position is the sum of letter parities
        vp = np.asarray(alg.vbasis.parities, np.int8)
        dv = alg.vbasis.dim
        codes = np.arange(t.nrows)
        pw = np.zeros(t.nrows, np.int64)
        npairs = np.zeros(t.nrows, np.int64)
        digits = []
        c = codes.copy()
        for _ in range(alg.d):
            digits.append(c % dv)
            c //= dv
        for dgt in digits:
            pw += vp[dgt]
        par = (pw & 1).astype(np.int8)
        # pairing sign of the dual tensor word: (-1)^{C(#odd letters, 2)}
        kap = (pw * (pw - 1) // 2) & 1
        ksign = np.where(kap, -1, 1)
        Mt = ml.super_transpose(M, par, par, p)
        Mt = (ksign[:, None] * Mt * ksign[None, :]) % p
        return self.dual_alg.coords_of(Mt)

    def act(self, x):
        inner_act = self.inner.act(self._dual_coords(x))
        return ml.super_transpose(inner_act, self.inner_par_space(),
                                  self.inner_par_space(), self.alg.p)

    def inner_par_space(self):
        return np.array(self.inner.ts.basis.parities, np.int8)


class _ComposeNode(_Node):
    def __init__(self, alg, ts, outer_node, Wts, s, kinds):
        super().__init__(alg, ts)
        self.outer = outer_node
        self.Wts = Wts
        self.s = s
        self.kinds = kinds  # per W-basis vector: summand kind 0..3

    def act(self, x):
        alg = self.alg
        p = alg.p
        dW = self.Wts.dim
        psd = p ** self.s
        dF = alg.d // psd
        vp = alg.vbasis.parities
        ev = [i for i, q in enumerate(vp) if q == 0]
        od = [i for i, q in enumerate(vp) if q == 1]
        dv = alg.vbasis.dim
        # the W-letter (a, b) pulls back to a concentrated run on an End(V)
        # letter, provided both ends sit in the same summand copy
        kinds = self.kinds
        lab = self.Wts.basis.labels

        def pullback(a, b):
            ka, ca = lab[a][1], lab[a][2]
            kb, cb = lab[b][1], lab[b][2]
            if (ka, ca) != (kb, cb):
                return None
            block = ev if ka in (0, 1) else od
            return block[lab[a][3]] * dv + block[lab[b][3]]

        outer_alg = self.outer.alg
        pbW = outer_alg.basis
        y = np.zeros(pbW.dim, np.int64)
        pb_big = alg.basis
        for zi, zeta in enumerate(pbW.monomials):
            letters = []
            ok = True
            for h in zeta:
                u = pullback(h // dW, h % dW)
                if u is None:
                    ok = False
                    break
                letters.extend([u] * psd)
            if not ok:
                continue
            T = tuple(letters)
            idx = pb_big.index.get(tuple(sorted(T)))
            if idx is None:
                continue
            sgn = _tuple_entry_sign(alg, T)
            if sgn:
                y[zi] = (sgn * x[idx]) % p
        return self.outer.act(y)


def _tuple_entry_sign(alg, T):
    """Entry sign (sort sign times application sign) of a letter tuple."""
    vp = alg.vbasis.parities
    dv = alg.vbasis.dim
    fpar = [vp[h // dv] ^ vp[h % dv] for h in T]
    cpar = [vp[h % dv] for h in T]
    inv = 0
    for i in range(len(T)):
        for j in range(i + 1, len(T)):
            if T[i] > T[j] and fpar[i] and fpar[j]:
                inv += 1
            if T[i] == T[j] and fpar[i]:
                return 0
    kap = 0
    for t in range(len(T)):
        if fpar[t]:
            kap += sum(cpar[:t])
    return -1 if (inv + kap) & 1 else 1


class _ParamNode(_Node):
    def __init__(self, alg, ts, outer_node, Ets):
        super().__init__(alg, ts)
        self.outer = outer_node
        self.Ets = Ets

    def act(self, x):
        alg = self.alg
        p = alg.p
        dv = alg.vbasis.dim
        dE = self.Ets.dim // dv  # E-index count
        outer_alg = self.outer.alg
        y = np.zeros(outer_alg.dim, np.int64)
        for zi, zeta in enumerate(outer_alg.basis.monomials):
            letters = []
            ok = True
            for h in zeta:
                a, b = h // self.Ets.dim, h % self.Ets.dim
                if a // dv != b // dv:
                    ok = False
                    break
                letters.append((a % dv) * dv + (b % dv))
            if not ok:
                continue
            idx = alg.basis.index.get(tuple(sorted(letters)))
            if idx is not None:
                y[zi] = x[idx]
        return self.outer.act(y)


# ---------------------------------------------------------------------------
# building nodes
# ---------------------------------------------------------------------------

def _context_algebra(p, ts: TSpace, d):
    """An algebra-like context over an arbitrary tagged basis."""
    alg = sc.SchurSuperalgebra.__new__(sc.SchurSuperalgebra)
    alg.p = p
    alg.m, alg.n = ts.sdim
    alg.d = d
    alg.space = None
    alg.vbasis = ts.basis
    alg.tables = ml.hom_tables(ts.basis, ts.basis, d)
    alg.basis = alg.tables.pbasis
    alg.dim = alg.basis.dim
    ident = np.zeros(ts.basis.dim ** 2, np.int64)
    for i in range(ts.basis.dim):
        ident[i * ts.basis.dim + i] = 1
    alg.unit = ml.dp_vector(alg.tables.base, d, ident, p)
    alg._gens = None
    alg._lock = threading.Lock()
    return alg


def _build(expr, alg, ts: TSpace):
    E = sc
    p = alg.p
    if isinstance(expr, E.Gamma):
        return _GammaNode(alg, space_eval(expr, ts, p), expr.d)
    if isinstance(expr, E.Sym):
        return _SymNode(alg, space_eval(expr, ts, p), expr.d)
    if isinstance(expr, E.GammaParam):
        return _GammaParamNode(alg, space_eval(expr, ts, p), expr.d,
                               SuperSpace.kmn(expr.m, expr.n))
    if isinstance(expr, E.Twist):
        return _TwistNode(alg, space_eval(expr, ts, p), expr.r, expr.ell)
    if isinstance(expr, E.Ident):
        return _IdentNode(alg, ts)
    if isinstance(expr, E.Pi):
        return _PiNode(alg, ts.flip())
    if isinstance(expr, E.PostPi):
        inner = _build(expr.inner, alg, ts)
        return _PostPiNode(alg, inner.ts.flip(), inner)
    if isinstance(expr, E.PrePi):
        flipped = _context_algebra(p, ts.flip(), alg.d)
        inner = _build(expr.inner, flipped, ts.flip())
        return _PreFlipNode(alg, inner.ts, flipped, inner)
    if isinstance(expr, E.Sum):
        parts = [_build(f, alg, ts) for f in expr.parts]
        return _SumNode(alg, space_eval(expr, ts, p), parts)
    if isinstance(expr, E.Tensor):
        d1 = expr.left.degree(p)
        d2 = expr.right.degree(p)
        a1 = _context_algebra(p, ts, d1)
        a2 = _context_algebra(p, ts, d2)
        left = _build(expr.left, a1, ts)
        right = _build(expr.right, a2, ts)
        return _TensorNode(alg, space_eval(expr, ts, p), left, right, d1, d2)
    if isinstance(expr, E.Dual):
        dts = ts.dual()
        dalg = _context_algebra(p, dts, alg.d)
        inner = _build(expr.inner, dalg, dts)
        return _DualNode(alg, space_eval(expr, ts, p), dalg, inner, inner.ts)
    if isinstance(expr, E.Compose):
        from .additive import classify_additive
        cls = classify_additive(expr.inner, p)
        if cls.r < 1:
            raise NotAdditiveError("inner functor must have degree >= p")
        W = _inner_additive_space(expr.inner, ts, p)
        dF = expr.outer.degree(p)
        walg = _context_algebra(p, W, dF)
        outer = _build(expr.outer, walg, W)
        kinds = tuple(lbl[1] for lbl in W.basis.labels)
        return _ComposeNode(alg, outer.ts, outer, W, cls.r, kinds)
    if isinstance(expr, E.Param):
        Ets = _param_space(expr.graded, ts)
        ealg = _context_algebra(p, Ets, alg.d)
        outer = _build(expr.inner, ealg, Ets)
        return _ParamNode(alg, outer.ts, outer, Ets)
    raise TypeError(type(expr))


def evaluate(expr, algebra) -> SuperModule:
    """Evaluate a functor expression into a supermodule over the algebra."""
    p = algebra.p
    d = expr.degree(p)
    if d != algebra.d:
        raise DegreeMismatch(f"degree {d} vs algebra degree {algebra.d}")
    ts = TSpace.of_super(algebra.space)
    node = _build(expr, algebra, ts)
    return SuperModule(algebra, expr, node)
