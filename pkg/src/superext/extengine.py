"""Free supermodule covers, resolutions, and extension dimensions.

Free modules are direct sums of parity-shifted copies of the algebra; maps
between them are right multiplications by matrices of algebra elements.  A
parity-shifted copy is the algebra with its coordinate parities offset by
one and the action unchanged (no signs: left multiplication commutes with
right multiplication), which is isomorphic to the categorical parity twist
and keeps the bookkeeping sign-free.

Covers are greedy: walk the kernel basis just computed, keep each vector
not yet inside the submodule generated so far, and certify surjectivity by
exact rank bookkeeping.  Every computation splits along the coordinate
parity, which halves the eliminations.  Candidate membership tests run in
kernel coordinates (the kernel basis is in reduced echelon form, so a
kernel vector's coordinates are its entries at the free positions), where
candidates are unit vectors.

Extension dimensions of (F, G) are read from the resolution of F through
the free-module identification: the cochain space of a parity-f copy is
the parity-f part of G's evaluation and the cochain differential applies
the action of the differential entries.  The odd part of the answer uses
the same resolution with all copy parities flipped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, DegreeMismatch
from .ffield import IncrementalRREF, rref_ip
from ._kernels import kernel_from_rref
from .superspace import ParitySeries
from . import schur as sc

DEFAULT_BUDGET = 100_000


@dataclass
class FreeSuperModule:
    algebra: object
    copies: tuple  # parity flag per copy

    @property
    def even_rank(self):
        return sum(1 for f in self.copies if f == 0)

    @property
    def odd_rank(self):
        return sum(1 for f in self.copies if f == 1)

    @property
    def dim(self):
        return len(self.copies) * self.algebra.dim

    def coord_parities(self):
        base = self.algebra.basis.parities.astype(np.int8)
        if not self.copies:
            return np.zeros(0, np.int8)
        return np.concatenate([(base ^ f) for f in self.copies])

    def flip(self):
        return FreeSuperModule(self.algebra, tuple(1 - f for f in self.copies))


@dataclass
class FreeMap:
    """target <- source; source generator j maps to the target element with
    components entries[j][i] in the algebra."""

    source: FreeSuperModule
    target: FreeSuperModule
    entries: np.ndarray  # (#source copies, #target copies, dim A)


class _Kernel:
    """Kernel of one parity block of a differential, in reduced echelon
    form, together with the free positions that realize kernel coordinates."""

    def __init__(self, q, csel, A, p):
        self.q = q
        self.csel = csel
        piv = rref_ip(A, p)
        self.rank = len(piv)
        self.K = kernel_from_rref(A, np.asarray(piv, np.int64), p)
        self.free = np.setdiff1d(np.arange(A.shape[1]),
                                 np.asarray(piv, np.int64))

    @property
    def dim(self):
        return self.K.shape[1]


class Resolution:
    """Iterated greedy free covers of a supermodule."""

    def __init__(self, module, budget=DEFAULT_BUDGET):
        self.module = module
        self.algebra = module.algebra
        self.budget = budget
        self.frees = []
        self.gens = []
        self.maps = []
        self.kernel_dims = []
        self.image_dims = []
        self.budget_hit = False
        self._kernels = None
        self._start()

    def _start(self):
        M = self.module
        alg = self.algebra
        p = alg.p
        inc = IncrementalRREF(p, M.dim)
        gens = []
        blocks = []
        for b in range(M.dim):
            e = np.zeros(M.dim, np.int64)
            e[b] = 1
            if not inc.reduce(e[None, :]).any():
                continue
            cov = M.cover_columns(e) % p
            inc.add_rows(cov.T)
            gens.append((int(M.tags[b]), e))
            blocks.append(cov)
            if inc.rank == M.dim:
                break
        assert inc.rank == M.dim, "cover is not surjective"
        self.gens.append(gens)
        free = FreeSuperModule(alg, tuple(f for f, _ in gens))
        self.frees.append(free)
        self.aug = (np.hstack(blocks) if blocks
                    else np.zeros((M.dim, 0), np.int64)) % p
        par_src = free.coord_parities()
        tags = M.tags
        kernels = []
        for q in (0, 1):
            csel = np.nonzero(par_src == q)[0]
            rsel = np.nonzero(tags == q)[0]
            A = np.ascontiguousarray(
                self.aug[np.ix_(rsel, csel)].astype(np.int8))
            kernels.append(_Kernel(q, csel, A, p))
        self._kernels = kernels
        self.kernel_dims.append(sum(k.dim for k in kernels))
        self.image_dims.append(M.dim)

    def extend(self, steps):
        while len(self.maps) < steps and not self.budget_hit:
            self._extend_once()
        return self

    def _extend_once(self):
        alg = self.algebra
        p = alg.p
        src = self.frees[-1]
        kdim = self.kernel_dims[-1]
        if kdim > self.budget:
            self.budget_hit = True
            return
        bpar = alg.basis.parities
        par_src = src.coord_parities()
        sel = {q: np.nonzero(par_src == q)[0] for q in (0, 1)}
        kern = {k.q: k for k in self._kernels}
        track = {q: IncrementalRREF(p, kern[q].dim) for q in (0, 1)}
        ablocks = {0: [], 1: []}
        gens = []

        def covered():
            return track[0].rank + track[1].rank

        for q in (0, 1):
            K = kern[q].K
            for cand in range(K.shape[1]):
                if covered() == kdim:
                    break
                if track[q].rank == K.shape[1]:
                    break
                e = np.zeros((1, K.shape[1]), np.int64)
                e[0, cand] = 1
                if not track[q].reduce(e).any():
                    continue
                # accept the kernel basis vector as a new generator
                v = np.zeros(src.dim, np.int64)
                v[kern[q].csel] = K[:, cand]
                comps = v.reshape(len(src.copies), alg.dim) % p
                rstack = [alg.right_mul_matrix(c) for c in comps]
                gens.append((q, v))
                for qq in (0, 1):
                    th = np.nonzero(bpar == (qq ^ q))[0]
                    block = np.concatenate([R[:, th] for R in rstack], axis=0) \
                        if rstack else np.zeros((src.dim, len(th)), np.int8)
                    cols = block[sel[qq], :]
                    ablocks[qq].append(np.ascontiguousarray(cols))
                    # span rows in kernel coordinates of parity qq
                    track[qq].add_rows(cols[kern[qq].free, :].T)
                del rstack
        assert covered() == kdim, "kernel cover incomplete"
        new = FreeSuperModule(alg, tuple(f for f, _ in gens))
        entries = np.zeros((len(gens), len(src.copies), alg.dim), np.int64)
        for j, (_, v) in enumerate(gens):
            entries[j] = v.reshape(len(src.copies), alg.dim) % p
        self.frees.append(new)
        self.gens.append(gens)
        self.maps.append(FreeMap(new, src, entries))
        kernels = []
        rank_total = 0
        for q in (0, 1):
            if ablocks[q]:
                A = np.ascontiguousarray(np.hstack(ablocks[q]).astype(np.int8))
            else:
                A = np.zeros((len(sel[q]), 0), np.int8)
            csel_new = np.nonzero(new.coord_parities() == q)[0]
            k = _Kernel(q, csel_new, A, p)
            kernels.append(k)
            rank_total += k.rank
        assert rank_total == kdim, "image rank does not match the kernel"
        self._kernels = kernels
        self.kernel_dims.append(sum(k.dim for k in kernels))
        self.image_dims.append(kdim)

    def euler_check(self):
        """Rank bookkeeping: dim P_k = image_k + kernel_k at every stage."""
        for k, fr in enumerate(self.frees):
            if fr.dim != self.image_dims[k] + self.kernel_dims[k]:
                return False
        return True


def free_cover(M):
    """Greedy free cover of a module: (free module, generator list,
    augmentation matrix, kernel dimension)."""
    res = Resolution(M, budget=10 ** 18)
    return res.frees[0], res.gens[0], res.aug, res.kernel_dims[0]


def resolve(M, steps, budget=DEFAULT_BUDGET) -> Resolution:
    return Resolution(M, budget=budget).extend(steps)


@dataclass
class ExtResult:
    pair: tuple
    p: int
    m: int
    n: int
    max_degree: int
    series: ParitySeries
    computed_range: int
    budget_hit: bool
    wall_time_ms: int

    def to_json(self):
        return {
            "pair": list(self.pair),
            "p": self.p, "m": self.m, "n": self.n,
            "max_degree": self.max_degree,
            "series": self.series.to_json(),
            "computed_range": self.computed_range,
            "budget_hit": self.budget_hit,
            "wall_time_ms": self.wall_time_ms,
        }


_resolution_cache: dict = {}


def resolution_for(F: sc.Expr, m, n, p, steps, budget=DEFAULT_BUDGET):
    """Shared resolutions keyed by (p, m, n, canonical expression text)."""
    key = (p, m, n, F.text())
    res = _resolution_cache.get(key)
    if res is None or (res.budget_hit and budget > res.budget):
        alg = sc.schur_algebra(p, m, n, F.degree(p))
        res = Resolution(sc.evaluate(F, alg), budget=budget)
        _resolution_cache[key] = res
    res.extend(steps)
    return res


def ext_dims(F: sc.Expr, G: sc.Expr, max_degree, m, n, p,
             budget=DEFAULT_BUDGET) -> ExtResult:
    """Parity-tracked extension dimensions of (F, G) over S(m|n, deg)."""
    t0 = time.time()
    if F.degree(p) != G.degree(p):
        raise DegreeMismatch((F.text(), G.text()))
    res = resolution_for(F, m, n, p, max_degree + 1, budget)
    alg = res.algebra
    N = sc.evaluate(G, alg)
    tags = N.tags
    nsel = {q: np.nonzero(tags == q)[0] for q in (0, 1)}
    acts = []
    for fmap in res.maps:
        blocks = [[N.act(fmap.entries[j][i])
                   for i in range(len(fmap.target.copies))]
                  for j in range(len(fmap.source.copies))]
        acts.append((fmap, blocks))
    series = ParitySeries(max_degree)
    steps = len(res.maps)
    computed = min(max_degree, steps - 1)
    for flip in (0, 1):
        deltas = []
        for fmap, blocks in acts:
            rows = []
            for j, fj in enumerate(fmap.source.copies):
                cols = [blocks[j][i][np.ix_(nsel[fj ^ flip], nsel[fi ^ flip])]
                        for i, fi in enumerate(fmap.target.copies)]
                if cols:
                    rows.append(np.hstack(cols))
                else:
                    rows.append(np.zeros((len(nsel[fj ^ flip]), 0), np.int64))
            if rows:
                deltas.append(np.vstack(rows) % p)
            else:
                w = sum(len(nsel[f ^ flip]) for f in fmap.target.copies)
                deltas.append(np.zeros((0, w), np.int64))
        dims = [sum(len(nsel[f ^ flip]) for f in fr.copies)
                for fr in res.frees]
        ranks = [_rank(d, p) for d in deltas]
        for k in range(computed + 1):
            below = ranks[k - 1] if k >= 1 else 0
            above = ranks[k] if k < len(ranks) else 0
            val = dims[k] - below - above
            if flip == 0:
                series.even[k] = val
            else:
                series.odd[k] = val
    return ExtResult((F.text(), G.text()), p, m, n, max_degree, series,
                     computed, res.budget_hit, int((time.time() - t0) * 1000))


def _rank(a, p):
    if a.size == 0:
        return 0
    work = np.ascontiguousarray(a.astype(np.int8))
    return len(rref_ip(work, p))
