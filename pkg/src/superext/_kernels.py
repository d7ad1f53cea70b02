"""Hot elimination kernels over F_p.

Row reduction is organised LAPACK-style: a narrow panel is factored with
scalar loops (numba @njit when available, pure numpy otherwise) and the
trailing matrix is updated with BLAS float64 matmuls.  All float64 products
are exact: entries lie in [0, p) and the inner dimension is capped, so every
accumulated integer stays far below 2**53.

Backend selection: environment variable SUPEREXT_BACKEND in
{"auto", "numba", "numpy"} (default "auto" = numba if importable).
"""

from __future__ import annotations

import os

import numpy as np

_PANEL = 192        # panel width for blocked elimination
_CHUNK = 4096       # trailing-update column chunk

_env = os.environ.get("SUPEREXT_BACKEND", "auto").lower()
if _env not in ("auto", "numba", "numpy"):
    raise ValueError("SUPEREXT_BACKEND must be auto, numba or numpy")

_HAVE_NUMBA = False
if _env in ("auto", "numba"):
    try:
        from numba import njit
        _HAVE_NUMBA = True
    except ImportError:
        if _env == "numba":
            raise


def active_backend() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


def modinv(v: int, p: int) -> int:
    return pow(int(v) % p, p - 2, p)


# ---------------------------------------------------------------------------
# panel factorization: forward elimination on a column slice
#
# Contract (both backends): S is (m, nb) int64, already reduced mod p.
# Rows >= r are eligible as pivots.  On return S holds the panel after
# forward elimination: pivot rows swapped up to r, r+1, ..., scaled to a
# unit pivot, all rows below each pivot cleared *within the panel columns*.
# Returns (k, pivcols, swaps, invs, mult):
#   k        number of pivots found
#   pivcols  local column index of pivot t
#   swaps    row swapped with r+t when pivot t was brought up (>= r+t)
#   invs     inverse of the original pivot value
#   mult     (m-r, k) multipliers: mult[i, t] is the factor of pivot row t
#            subtracted from (current) row r+i; rows of mult are swapped in
#            step with the rows of S, so row t of mult carries the strictly
#            lower triangle among pivot rows.
# ---------------------------------------------------------------------------

def _panel_forward_np(S, r, p):
    m, nb = S.shape
    maxk = min(m - r, nb)
    pivcols = np.empty(maxk, np.int64)
    swaps = np.empty(maxk, np.int64)
    invs = np.empty(maxk, np.int64)
    mult = np.zeros((m - r, maxk), np.int64)
    k = 0
    for c in range(nb):
        if r + k == m:
            break
        col = S[r + k:, c]
        nz = np.nonzero(col)[0]
        if nz.size == 0:
            continue
        i = r + k + int(nz[0])
        if i != r + k:
            S[[r + k, i], :] = S[[i, r + k], :]
            mult[[k, i - r], :] = mult[[i - r, k], :]
        swaps[k] = i
        iv = modinv(S[r + k, c], p)
        invs[k] = iv
        S[r + k, c:] = (S[r + k, c:] * iv) % p
        below = S[r + k + 1:, c]
        rows = np.nonzero(below)[0]
        if rows.size:
            f = below[rows]
            mult[rows + (k + 1), k] = f
            S[r + k + 1 + rows, c:] = (
                S[r + k + 1 + rows, c:] - f[:, None] * S[r + k, c:]
            ) % p
        pivcols[k] = c
        k += 1
    return k, pivcols[:k], swaps[:k], invs[:k], mult[:, :k]


if _HAVE_NUMBA:

    @njit(cache=True)
    def _panel_forward_nb(S, r, p):  # pragma: no cover - exercised via driver
        m, nb = S.shape
        maxk = min(m - r, nb)
        pivcols = np.empty(maxk, np.int64)
        swaps = np.empty(maxk, np.int64)
        invs = np.empty(maxk, np.int64)
        mult = np.zeros((m - r, maxk), np.int64)
        k = 0
        for c in range(nb):
            if r + k == m:
                break
            i = r + k
            while i < m and S[i, c] == 0:
                i += 1
            if i == m:
                continue
            if i != r + k:
                for j in range(nb):
                    tmp = S[r + k, j]
                    S[r + k, j] = S[i, j]
                    S[i, j] = tmp
                for j in range(k):
                    tmp = mult[k, j]
                    mult[k, j] = mult[i - r, j]
                    mult[i - r, j] = tmp
            swaps[k] = i
            # Fermat inverse
            iv = 1
            base = S[r + k, c] % p
            e = p - 2
            while e > 0:
                if e & 1:
                    iv = (iv * base) % p
                base = (base * base) % p
                e >>= 1
            invs[k] = iv
            for j in range(c, nb):
                S[r + k, j] = (S[r + k, j] * iv) % p
            for i2 in range(r + k + 1, m):
                f = S[i2, c]
                if f != 0:
                    mult[i2 - r, k] = f
                    for j in range(c, nb):
                        S[i2, j] = (S[i2, j] - f * S[r + k, j]) % p
            pivcols[k] = c
            k += 1
        return k, pivcols[:k], swaps[:k], invs[:k], mult[:, :k]

    _panel_forward = _panel_forward_nb
else:
    _panel_forward = _panel_forward_np


def _panel(backend):
    if backend is None:
        return _panel_forward
    if backend == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return _panel_forward_nb
    return _panel_forward_np


def _unit_lower_inverse(L, p):
    """Invert a unit lower triangular int64 matrix mod p."""
    k = L.shape[0]
    inv = np.eye(k, dtype=np.int64)
    for t in range(k):
        # subtract L[t, :t] applied to already-computed rows
        if t:
            inv[t, :t] = (-L[t, :t] @ inv[:t, :t]) % p
    return inv


def _unit_upper_inverse(U, p):
    """Invert a unit upper triangular int64 matrix mod p."""
    k = U.shape[0]
    inv = np.eye(k, dtype=np.int64)
    for t in range(k - 2, -1, -1):
        inv[t, t + 1:] = (-U[t, t + 1:] @ inv[t + 1:, t + 1:]) % p
    return inv


def _gemm_sub_chunked(C, A, B):
    """C -= A @ B in float, chunked over columns to bound temporaries."""
    w = C.shape[1]
    if w == 0 or A.shape[1] == 0 or C.shape[0] == 0:
        return
    for c0 in range(0, w, _CHUNK):
        c1 = min(c0 + _CHUNK, w)
        C[:, c0:c1] -= A @ B[:, c0:c1]


def _work_dtype(m, n, p):
    """Float dtype keeping all lazily-accumulated integers exact.

    Entries grow additively by at most PANEL*(p-1)^2 per block pass, so the
    magnitude is bounded by (max(m,n) + PANEL) * (p-1)^2.
    """
    bound = (max(m, n) + _PANEL) * (p - 1) ** 2
    if bound < 2 ** 23:
        return np.float32
    if bound < 2 ** 52:
        return np.float64
    raise ValueError(f"p = {p} too large for blocked elimination at this size")


def rref_mod(a, p, backend=None):
    """Full reduced row echelon form of `a` mod p, in place.

    `a` must be a 2-D C-contiguous integer array with entries in [0, p).
    Returns the array of global pivot column indices.  The result is the
    (unique) RREF, so it is independent of backend and blocking.

    Internally the matrix is lifted once to a float working copy; trailing
    updates accumulate without reduction (exactly, see _work_dtype) and each
    panel is reduced mod p only when it is factored.
    """
    m, n = a.shape
    if m == 0 or n == 0:
        return np.empty(0, np.int64)
    panel = _panel(backend)
    W = a.astype(_work_dtype(m, n, p))
    pivcols_all = []
    r = 0
    for j0 in range(0, n, _PANEL):
        if r == m:
            break
        j1 = min(j0 + _PANEL, n)
        Wp = W[:, j0:j1]
        np.mod(Wp, p, out=Wp)
        S = Wp.astype(np.int64)
        k, pivcols, swaps, invs, mult = panel(S, r, p)
        Wp[:] = S
        if k == 0:
            continue
        # apply row swaps (in order) to the trailing region
        for t in range(k):
            i = int(swaps[t])
            if i != r + t:
                tmp = W[r + t, j1:].copy()
                W[r + t, j1:] = W[i, j1:]
                W[i, j1:] = tmp
        if j1 < n:
            trail = W[r:, j1:]
            # pivot rows first: TrPiv = (I + D L)^-1 (D P_piv), reduced
            L = np.tril(mult[:k, :], -1)
            M = (np.eye(k, dtype=np.int64) + (invs[:, None] * L)) % p
            Minv = _unit_lower_inverse(M, p).astype(W.dtype)
            head = trail[:k, :]
            np.mod(head, p, out=head)
            piv = Minv @ (invs[:, None].astype(W.dtype) * head)
            np.mod(piv, p, out=piv)
            trail[:k, :] = piv
            # remaining rows accumulate unreduced
            _gemm_sub_chunked(trail[k:, :], mult[k:, :].astype(W.dtype), piv)
        pivcols_all.extend(int(c) + j0 for c in pivcols)
        r += k
    np.mod(W, p, out=W)
    pivcols = np.asarray(pivcols_all, np.int64)
    rank = len(pivcols)
    # backward pass: clear entries above pivots, blocked right-to-left.
    # Within a block, later pivot rows are first subtracted from earlier
    # ones (unit upper triangular solve), then one matmul clears the rows
    # above the block.  Updates again accumulate unreduced.
    t1 = rank
    while t1 > 0:
        t0 = max(0, t1 - _PANEL)
        cols = pivcols[t0:t1]
        start = int(cols[0])
        k = t1 - t0
        blk = W[t0:t1, start:]
        np.mod(blk, p, out=blk)
        if k > 1:
            U = blk[:, cols - start].astype(np.int64)
            if np.triu(U, 1).any():
                Uinv = _unit_upper_inverse(U, p).astype(W.dtype)
                piv = Uinv @ blk
                np.mod(piv, p, out=piv)
                blk[:] = piv
        if t0:
            coef = W[:t0, :][:, cols]          # fancy index: a copy
            np.mod(coef, p, out=coef)
            W[:t0, :][:, cols] = coef          # store reduced values back
            if coef.any():
                # full-range update; pivot columns land on exact zeros
                _gemm_sub_chunked(W[:t0, start:], coef, blk)
        t1 = t0
    np.mod(W, p, out=W)
    a[:] = W.astype(a.dtype)
    return pivcols


def kernel_from_rref(R, pivcols, p, dtype=None):
    """Kernel basis from an RREF matrix: one vector per free column.

    Returns an (n, n - rank) array whose columns are the standard kernel
    basis: unit at the free column, minus the RREF entry at pivot rows.
    """
    n = R.shape[1]
    rank = len(pivcols)
    free = np.setdiff1d(np.arange(n), pivcols)
    if dtype is None:
        dtype = R.dtype
    K = np.zeros((n, len(free)), dtype=dtype)
    K[free, np.arange(len(free))] = 1
    if rank and len(free):
        block = R[:rank, :][:, free].astype(np.int64)
        K[pivcols, :] = ((-block) % p).astype(dtype)
    return K


def rank_mod(a, p, backend=None):
    """Rank of `a` mod p; `a` is copied, not modified."""
    work = np.ascontiguousarray(a.astype(np.int64) % p)
    return len(rref_mod(work, p, backend=backend))


def matmul_mod(a, b, p):
    """Exact (a @ b) % p via chunked float64 BLAS."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.empty((m, n), np.int64)
    if k == 0:
        out[:] = 0
        return out
    af = a.astype(np.float64)
    for c0 in range(0, n, _CHUNK):
        c1 = min(c0 + _CHUNK, n)
        acc = af @ b[:, c0:c1].astype(np.float64)
        np.mod(acc, p, out=acc)
        out[:, c0:c1] = acc.astype(np.int64)
    return out


# ---------------------------------------------------------------------------
# sparse elimination (dict-of-rows).  Cold path: used for genuinely sparse
# inputs through the public Mat API.  Produces the same unique RREF as the
# dense kernels.
# ---------------------------------------------------------------------------

def sparse_rref(rows, n, p):
    """RREF of a matrix given as a list of {col: value} dicts.

    Mutates `rows` into the RREF and returns the pivot column list.
    Pivot selection scans columns in increasing order and takes the
    lowest-index eligible row, matching the dense elimination.
    """
    m = len(rows)
    pivots = []
    pivot_of_row = {}
    r = 0
    for c in range(n):
        if r == m:
            break
        prow = None
        for i in range(r, m):
            if rows[i].get(c, 0):
                prow = i
                break
        if prow is None:
            continue
        if prow != r:
            rows[r], rows[prow] = rows[prow], rows[r]
        iv = modinv(rows[r][c], p)
        if iv != 1:
            rows[r] = {j: (v * iv) % p for j, v in rows[r].items()}
        prowd = rows[r]
        for i in range(m):
            if i == r:
                continue
            f = rows[i].get(c, 0)
            if f:
                ri = rows[i]
                for j, v in prowd.items():
                    nv = (ri.get(j, 0) - f * v) % p
                    if nv:
                        ri[j] = nv
                    elif j in ri:
                        del ri[j]
        pivots.append(c)
        pivot_of_row[r] = c
        r += 1
    return pivots
