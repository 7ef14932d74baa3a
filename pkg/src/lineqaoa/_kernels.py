"""Numba kernels for the density-matrix engine.

The density matrix lives as a flat complex128 array of length 4**n whose
base-4 digit q encodes the (ket, bra) index pair of qubit q, most
significant digit first. Channels and gate blocks become 4x4 (one qubit)
or 16x16 (qubit pair) superoperators applied along those digits; the 16x16
case is stored row-sparse since fused CX/relaxation blocks are mostly
zeros.

Kernels view the state as interleaved float64 (re, im) and carry separate
real/imaginary coefficient tables, which lets LLVM vectorize; purely real
superoperators (every gate block without RZ/RX/H content, e.g. fused
CX+relaxation) take a dedicated path with half the arithmetic.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

__all__ = [
    "apply_pair_superop",
    "apply_single_superop",
    "rest_offsets",
    "sparsify16",
]


@njit(parallel=True, fastmath=True, cache=True)
def _pair_complex(rf, of, bases, sa, sb, nnz, cols, vr, vi):
    nb = bases.shape[0]
    nchunks = 64 if nb >= 64 else 1
    chunk = (nb + nchunks - 1) // nchunks
    for c in prange(nchunks):
        lr = np.empty(16, dtype=np.float64)
        li = np.empty(16, dtype=np.float64)
        start = c * chunk
        end = min(start + chunk, nb)
        for r in range(start, end):
            base = bases[r]
            for k in range(4):
                off = 2 * (base + k * sa)
                lr[4 * k] = rf[off]
                li[4 * k] = rf[off + 1]
                lr[4 * k + 1] = rf[off + 2 * sb]
                li[4 * k + 1] = rf[off + 2 * sb + 1]
                lr[4 * k + 2] = rf[off + 4 * sb]
                li[4 * k + 2] = rf[off + 4 * sb + 1]
                lr[4 * k + 3] = rf[off + 6 * sb]
                li[4 * k + 3] = rf[off + 6 * sb + 1]
            for m in range(16):
                ar = 0.0
                ai = 0.0
                for t in range(nnz[m]):
                    j = cols[m, t]
                    ar += vr[m, t] * lr[j] - vi[m, t] * li[j]
                    ai += vr[m, t] * li[j] + vi[m, t] * lr[j]
                off = 2 * (base + (m >> 2) * sa + (m & 3) * sb)
                of[off] = ar
                of[off + 1] = ai


@njit(parallel=True, fastmath=True, cache=True)
def _pair_real(rf, of, bases, sa, sb, nnz, cols, vr):
    nb = bases.shape[0]
    nchunks = 64 if nb >= 64 else 1
    chunk = (nb + nchunks - 1) // nchunks
    for c in prange(nchunks):
        lr = np.empty(16, dtype=np.float64)
        li = np.empty(16, dtype=np.float64)
        start = c * chunk
        end = min(start + chunk, nb)
        for r in range(start, end):
            base = bases[r]
            for k in range(4):
                off = 2 * (base + k * sa)
                lr[4 * k] = rf[off]
                li[4 * k] = rf[off + 1]
                lr[4 * k + 1] = rf[off + 2 * sb]
                li[4 * k + 1] = rf[off + 2 * sb + 1]
                lr[4 * k + 2] = rf[off + 4 * sb]
                li[4 * k + 2] = rf[off + 4 * sb + 1]
                lr[4 * k + 3] = rf[off + 6 * sb]
                li[4 * k + 3] = rf[off + 6 * sb + 1]
            for m in range(16):
                ar = 0.0
                ai = 0.0
                for t in range(nnz[m]):
                    j = cols[m, t]
                    ar += vr[m, t] * lr[j]
                    ai += vr[m, t] * li[j]
                off = 2 * (base + (m >> 2) * sa + (m & 3) * sb)
                of[off] = ar
                of[off + 1] = ai


@njit(parallel=True, fastmath=True, cache=True)
def _single_complex(rf, of, bases, s, Sr, Si):
    nb = bases.shape[0]
    for r in prange(nb):
        base = bases[r]
        for m in range(4):
            ar = 0.0
            ai = 0.0
            for j in range(4):
                off = 2 * (base + j * s)
                xr = rf[off]
                xi = rf[off + 1]
                ar += Sr[m, j] * xr - Si[m, j] * xi
                ai += Sr[m, j] * xi + Si[m, j] * xr
            off = 2 * (base + m * s)
            of[off] = ar
            of[off + 1] = ai


def apply_pair_superop(rho, out, bases, sa, sb, nnz, cols, vals):
    """out = S rho over the pair digits (strides sa, sb) of flat rho."""
    rf = rho.view(np.float64)
    of = out.view(np.float64)
    vi = vals.imag
    if np.any(np.abs(vi) > 0.0):
        _pair_complex(rf, of, bases, sa, sb, nnz, cols,
                      np.ascontiguousarray(vals.real), np.ascontiguousarray(vi))
    else:
        _pair_real(rf, of, bases, sa, sb, nnz, cols,
                   np.ascontiguousarray(vals.real))


def apply_single_superop(rho, out, bases, s, S):
    rf = rho.view(np.float64)
    of = out.view(np.float64)
    _single_complex(rf, of, bases, s,
                    np.ascontiguousarray(S.real), np.ascontiguousarray(S.imag))


def rest_offsets(n: int, axes: tuple[int, ...]) -> np.ndarray:
    """Flat offsets of every digit configuration with digits at ``axes`` = 0."""
    keep = [q for q in range(n) if q not in axes]
    strides = [4 ** (n - 1 - q) for q in range(n)]
    r = np.arange(4 ** len(keep), dtype=np.int64)
    out = np.zeros_like(r)
    for q in reversed(keep):
        out += (r & 3) * strides[q]
        r >>= 2
    return out


def sparsify16(S: np.ndarray, tol: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-sparse (nnz, cols, vals) form of a 16x16 superoperator."""
    nnz = np.zeros(16, dtype=np.int64)
    cols = np.zeros((16, 16), dtype=np.int64)
    vals = np.zeros((16, 16), dtype=np.complex128)
    for m in range(16):
        c = 0
        for j in range(16):
            if abs(S[m, j]) > tol:
                cols[m, c] = j
                vals[m, c] = S[m, j]
                c += 1
        nnz[m] = c
    return nnz, cols, vals
