# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernel: one statevector per shot, ops in a flat table."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport sqrt

cnp.import_array()

DEF U1 = 0
DEF U2 = 1
DEF MEASURE = 2
DEF RESET = 3
DEF DEPOL1 = 4
DEF DEPOL2 = 5

ctypedef unsigned long long u64


cdef inline double _uniform(u64 base, u64 shot) nogil:
    cdef u64 z = shot * <u64>0xD1B54A32D192ED03ULL + base
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return <double>(z >> 11) * (1.0 / 9007199254740992.0)


cdef inline Py_ssize_t _insert0(Py_ssize_t i, Py_ssize_t bit) nogil:
    # spread i so that position ``bit`` (a power of two) is a zero bit
    return ((i & ~(bit - 1)) << 1) | (i & (bit - 1))


cdef inline void _apply1(double complex* psi, Py_ssize_t dim, int q, double complex* m) nogil:
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t bit = (<Py_ssize_t>1) << q
    cdef double complex a0, a1
    cdef double complex m00 = m[0], m01 = m[1], m10 = m[4], m11 = m[5]
    for k in range(dim >> 1):
        i = _insert0(k, bit)
        j = i | bit
        a0 = psi[i]
        a1 = psi[j]
        psi[i] = m00 * a0 + m01 * a1
        psi[j] = m10 * a0 + m11 * a1


cdef inline void _apply2(double complex* psi, Py_ssize_t dim, int qa, int qb, double complex* m) nogil:
    # basis 2*s_a + s_b; m is row-major 4x4
    cdef Py_ssize_t i, k, r
    cdef Py_ssize_t ba = (<Py_ssize_t>1) << qa
    cdef Py_ssize_t bb = (<Py_ssize_t>1) << qb
    cdef Py_ssize_t lo = ba if ba < bb else bb
    cdef Py_ssize_t hi = bb if ba < bb else ba
    cdef double complex v0, v1, v2, v3
    cdef double complex* row
    for k in range(dim >> 2):
        i = _insert0(_insert0(k, lo), hi)
        v0 = psi[i]
        v1 = psi[i | bb]
        v2 = psi[i | ba]
        v3 = psi[i | ba | bb]
        row = m
        psi[i] = row[0] * v0 + row[1] * v1 + row[2] * v2 + row[3] * v3
        row = m + 4
        psi[i | bb] = row[0] * v0 + row[1] * v1 + row[2] * v2 + row[3] * v3
        row = m + 8
        psi[i | ba] = row[0] * v0 + row[1] * v1 + row[2] * v2 + row[3] * v3
        row = m + 12
        psi[i | ba | bb] = row[0] * v0 + row[1] * v1 + row[2] * v2 + row[3] * v3


cdef inline void _pauli(double complex* psi, Py_ssize_t dim, int q, int p) nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t bit = (<Py_ssize_t>1) << q
    cdef double complex a0, a1
    if p == 0:
        return
    for i in range(dim):
        if i & bit:
            continue
        j = i | bit
        a0 = psi[i]
        a1 = psi[j]
        if p == 1:
            psi[i] = a1
            psi[j] = a0
        elif p == 2:
            psi[i] = -1j * a1
            psi[j] = 1j * a0
        else:
            psi[j] = -a1


cdef inline int _measure(double complex* psi, Py_ssize_t dim, int q, double u) nogil:
    cdef Py_ssize_t i
    cdef Py_ssize_t bit = (<Py_ssize_t>1) << q
    cdef double p1 = 0.0, keep, norm
    cdef int out
    for i in range(dim):
        if i & bit:
            p1 += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    out = 1 if u < p1 else 0
    keep = p1 if out == 1 else 1.0 - p1
    if keep < 1e-300:
        keep = 1e-300
    norm = 1.0 / sqrt(keep)
    for i in range(dim):
        if ((i & bit) != 0) == (out == 1):
            psi[i] = psi[i] * norm
        else:
            psi[i] = 0
    return out


def run_trajectories(kind, q0, q1, mats, prob, draw, slot, int n_qubits, int n_slots,
                     Py_ssize_t n_shots, seed, Py_ssize_t shot_offset=0):
    """Sample ``n_shots`` trajectories; returns outcome bits of shape (n_shots, n_slots)."""
    cdef cnp.int32_t[::1] k_kind = np.ascontiguousarray(kind, dtype=np.int32)
    cdef cnp.int32_t[::1] k_q0 = np.ascontiguousarray(q0, dtype=np.int32)
    cdef cnp.int32_t[::1] k_q1 = np.ascontiguousarray(q1, dtype=np.int32)
    cdef double complex[:, :, ::1] k_mats = np.ascontiguousarray(mats, dtype=np.complex128)
    cdef double[::1] k_prob = np.ascontiguousarray(prob, dtype=np.float64)
    cdef cnp.int32_t[::1] k_slot = np.ascontiguousarray(slot, dtype=np.int32)
    cdef Py_ssize_t n_ops = k_kind.shape[0]
    mask = (1 << 64) - 1
    seed_part = (int(seed) * 0x9E3779B97F4A7C15) & mask
    base_np = np.array([(seed_part + (int(d) + 1) * 0x8CB92BA72F3D8DD7) & mask for d in draw],
                       dtype=np.uint64)
    cdef u64[::1] k_base = base_np
    out_np = np.zeros((n_shots, max(n_slots, 1)), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_np
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n_qubits
    cdef double complex* psi = <double complex*> malloc(dim * sizeof(double complex))
    cdef double complex m1[8]
    cdef Py_ssize_t s, k, i
    cdef int op, res, pidx, nd
    cdef double u, p
    if psi == NULL:
        raise MemoryError()
    try:
        with nogil:
            for s in range(n_shots):
                for i in range(dim):
                    psi[i] = 0
                psi[0] = 1
                for k in range(n_ops):
                    op = k_kind[k]
                    if op == U1:
                        _apply1(psi, dim, k_q0[k], &k_mats[k, 0, 0])
                    elif op == U2:
                        _apply2(psi, dim, k_q0[k], k_q1[k], &k_mats[k, 0, 0])
                    elif op == MEASURE or op == RESET:
                        u = _uniform(k_base[k], <u64>(s + shot_offset))
                        res = _measure(psi, dim, k_q0[k], u)
                        if op == MEASURE:
                            out[s, k_slot[k]] = res
                        elif res == 1:
                            _pauli(psi, dim, k_q0[k], 1)
                    else:
                        p = k_prob[k]
                        if p <= 0:
                            continue
                        nd = 4 if op == DEPOL1 else 16
                        u = _uniform(k_base[k], <u64>(s + shot_offset))
                        if u >= p * (nd - 1) / nd:
                            continue
                        pidx = <int>(u / (p / nd)) + 1
                        if pidx > nd - 1:
                            pidx = nd - 1
                        if op == DEPOL1:
                            _pauli(psi, dim, k_q0[k], pidx)
                        else:
                            _pauli(psi, dim, k_q0[k], pidx // 4)
                            _pauli(psi, dim, k_q1[k], pidx % 4)
    finally:
        free(psi)
    return out_np[:, :n_slots]
