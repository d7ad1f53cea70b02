"""Additivity testing and classification of additive superfunctors.

A nonzero additive homogeneous superfunctor has degree a power of p and is
a direct sum of copies of the four indecomposables (two at degree one).
The pairing between indecomposables and the four evaluation slots
F(k)_0, F(k)_1, F(Pk)_0, F(Pk)_1 is not hardcoded: it is established once
per (p, r) by evaluating the indecomposables themselves, and the observed
pairing is exposed for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import schur as sc
from .errors import NotAdditiveError, TheoremViolation
from .ffield import rank_mod
from .superspace import SuperSpace, ParitySeries, DEFAULT_TRUNCATION

#: canonical order of indecomposable kinds for r >= 1
KIND_NAMES = ("I0", "Pi o I0", "I0 o Pi", "Pi o I0 o Pi")


def indecomposable(kind, r) -> sc.Expr:
    """The canonical indecomposable additive functor of the given kind."""
    if r == 0:
        return sc.Ident() if kind == 0 else sc.Pi()
    tw = sc.Twist(r, 0)
    return [tw, sc.PostPi(tw), sc.PrePi(tw),
            sc.PostPi(sc.PrePi(tw))][kind]


#: normal form (post-Pi count alpha, twist part ell) of each kind
NORMAL_FORM = {0: (0, 0), 1: (1, 0), 2: (1, 1), 3: (0, 1)}


@dataclass
class AdditiveClassification:
    r: int
    mult: tuple  # four counts for r >= 1, two for r = 0

    def __str__(self):
        if self.r == 0:
            return f"{self.mult[0]}·I + {self.mult[1]}·Pi"
        names = (f"I0^({self.r})", f"(Pi o I0^({self.r}))",
                 f"(I0^({self.r}) o Pi)", f"(Pi o I0^({self.r}) o Pi)")
        return " + ".join(f"{m}·{n}" for m, n in zip(self.mult, names))

    def total(self):
        return sum(self.mult)


def _inclusion_matrix(V: SuperSpace, W: SuperSpace, first):
    """Matrix of the inclusion of V (or W) into V + W, in the basis order
    evens-then-odds of the direct sum."""
    U_even = len(V.even) + len(W.even)
    U_odd = len(V.odd) + len(W.odd)
    rows = U_even + U_odd
    src = V if first else W
    M = np.zeros((rows, src.dim), np.int64)
    e_off = 0 if first else len(V.even)
    o_off = U_even + (0 if first else len(V.odd))
    for j in range(len(src.even)):
        M[e_off + j, j] = 1
    for j in range(len(src.odd)):
        M[o_off + j, len(src.even) + j] = 1
    return M


def is_additive(F: sc.Expr, p, bound=(2, 2)):
    """Decide additivity on all test pairs up to the superdimension bound.

    Returns (True, None) or (False, witness) where the witness is the pair
    of superdimensions at which the inclusion-induced map fails to be
    bijective.
    """
    F.degree(p)  # raises NotHomogeneous early
    sdims = [(a, b) for a in range(bound[0] + 1) for b in range(bound[1] + 1)
             if a + b > 0]
    for s1 in sdims:
        for s2 in sdims:
            V = SuperSpace.kmn(*s1)
            W = SuperSpace.kmn(*s2)
            U = SuperSpace.kmn(s1[0] + s2[0], s1[1] + s2[1])
            tsV = sc.TSpace.of_super(V)
            tsW = sc.TSpace.of_super(W)
            tsU = sc.TSpace.of_super(U)
            m1 = sc.map_eval(F, _inclusion_matrix(V, W, True), tsV, tsU, p)
            m2 = sc.map_eval(F, _inclusion_matrix(V, W, False), tsW, tsU, p)
            T = np.hstack([m1, m2]) % p
            if T.shape[0] != T.shape[1] or rank_mod(T, p) != T.shape[0]:
                return False, (s1, s2)
    return True, None


@lru_cache(maxsize=None)
def evaluation_pairing(p, r):
    """slot index (F(k)_0, F(k)_1, F(Pk)_0, F(Pk)_1) -> indecomposable kind.

    Established by evaluating the indecomposables; each must occupy exactly
    one slot with dimension one.
    """
    k = SuperSpace.kmn(1, 0)
    pk = SuperSpace.kmn(0, 1)
    nkinds = 2 if r == 0 else 4
    slot_of = {}
    for kind in range(nkinds):
        X = indecomposable(kind, r)
        e0, o0 = sc.dim_eval(X, k, p)
        e1, o1 = sc.dim_eval(X, pk, p)
        slots = (e0, o0, e1, o1)
        if r == 0:
            # degree-one functors have the same dims at k and Pk; only the
            # value at k is used
            slots = (e0, o0)
        nz = [i for i, v in enumerate(slots) if v]
        if len(nz) != 1 or slots[nz[0]] != 1:
            raise TheoremViolation(
                f"indecomposable {kind} at r={r} has slots {slots}")
        slot_of[nz[0]] = kind
    if len(slot_of) != nkinds:
        raise TheoremViolation("evaluation slots do not separate summands")
    return tuple(slot_of[i] for i in range(nkinds))


def classify_additive(F: sc.Expr, p) -> AdditiveClassification:
    """Multiplicities of the indecomposable summands of an additive functor."""
    ok, witness = is_additive(F, p)
    if not ok:
        raise NotAdditiveError(f"{F.text()} is not additive, witness {witness}")
    d = F.degree(p)
    k = SuperSpace.kmn(1, 0)
    pk = SuperSpace.kmn(0, 1)
    e0, o0 = sc.dim_eval(F, k, p)
    e1, o1 = sc.dim_eval(F, pk, p)
    if e0 + o0 + e1 + o1 == 0:
        # the zero functor: report degree as given with zero multiplicities
        r = 0
        mult = (0, 0) if d == 1 else (0, 0, 0, 0)
        return AdditiveClassification(r, mult)
    r = 0
    dd = d
    while dd % p == 0:
        dd //= p
        r += 1
    if dd != 1:
        raise TheoremViolation(
            f"nonzero additive functor of non-p-power degree {d}")
    pairing = evaluation_pairing(p, r)
    if r == 0:
        slots = (e0, o0)
        mult = [0, 0]
    else:
        slots = (e0, o0, e1, o1)
        mult = [0, 0, 0, 0]
    for slot, kind in enumerate(pairing):
        mult[kind] = slots[slot]
    cls = AdditiveClassification(r, tuple(mult))
    _reconstruction_check(F, cls, p)
    return cls


def _reconstruction_check(F, cls, p):
    """The canonical sum with these multiplicities has the same evaluations
    on k^{1|0}, k^{0|1} and k^{1|1}."""
    parts = []
    for kind, m in enumerate(cls.mult):
        parts.extend([indecomposable(kind, cls.r)] * m)
    if not parts:
        return
    canon = parts[0] if len(parts) == 1 else sc.Sum(tuple(parts))
    for sd in [(1, 0), (0, 1), (1, 1)]:
        V = SuperSpace.kmn(*sd)
        if sc.dim_eval(F, V, p) != sc.dim_eval(canon, V, p):
            raise TheoremViolation(
                f"reconstruction mismatch for {F.text()} at {sd}")


def ext_additive_series(A: AdditiveClassification, B: AdditiveClassification,
                        max_degree=DEFAULT_TRUNCATION, p=3, c_parity=1) -> ParitySeries:
    """Parity-tracked dimensions of the graded extension space between two
    classified additive functors, extended bilinearly from the presentations
    of the indecomposable pairs.

    c_parity places the free-module generator class (cohomological degree
    p^t) in the odd (1, default) or even (0) part; the identity checkers
    run both placements.
    """
    if A.r != B.r:
        raise ValueError("twist order mismatch")
    from .yoneda import twist_algebra_series, twist_module_series
    out = ParitySeries(max_degree)
    r = A.r
    nkinds = 2 if r == 0 else 4
    for i in range(nkinds):
        if not A.mult[i]:
            continue
        for j in range(nkinds):
            if not B.mult[j]:
                continue
            if r == 0:
                alpha = i + j
                base = ParitySeries.delta(0, 1, 0, max_degree)
            else:
                ai, li = NORMAL_FORM[i]
                aj, lj = NORMAL_FORM[j]
                alpha = ai + aj
                if li == lj:
                    base = twist_algebra_series(r, p, max_degree)
                else:
                    base = twist_module_series(r, p, max_degree, c_parity)
            if alpha % 2:
                base = base.swap()
            out = out + base.scale(A.mult[i] * B.mult[j])
    return out
