# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: tape evaluation and cell energy/gradient assembly."""

from libc.math cimport exp, log, sin, cos, sqrt, pow
from libc.stdlib cimport malloc, free

import numpy as np


def eval_tape(tape, points):
    points_arr = np.ascontiguousarray(points, dtype=np.float64)
    if points_arr.ndim == 1:
        points_arr = points_arr[None, :]
    cdef double[:, ::1] pts = points_arr
    cdef long[:, ::1] ops = tape.ops
    cdef double[::1] consts = tape.consts
    cdef long[::1] outputs = tape.outputs
    cdef Py_ssize_t n_points = pts.shape[0]
    cdef Py_ssize_t n_vars = tape.n_vars
    cdef Py_ssize_t n_consts = consts.shape[0]
    cdef Py_ssize_t n_instr = ops.shape[0]
    cdef Py_ssize_t n_out = outputs.shape[0]
    cdef Py_ssize_t n_slots = tape.n_slots

    out_arr = np.empty((n_points, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double* slots = <double*> malloc(n_slots * sizeof(double))
    if slots == NULL:
        raise MemoryError()
    cdef Py_ssize_t p, i, k, base
    cdef long opcode, a, b
    cdef double va, vb
    base = n_consts + n_vars
    try:
        for k in range(n_consts):
            slots[k] = consts[k]
        for p in range(n_points):
            for k in range(n_vars):
                slots[n_consts + k] = pts[p, k]
            for i in range(n_instr):
                opcode = ops[i, 0]
                a = ops[i, 1]
                b = ops[i, 2]
                va = slots[a]
                if opcode == 0:
                    slots[base + i] = va + slots[b]
                elif opcode == 1:
                    slots[base + i] = va * slots[b]
                elif opcode == 2:
                    slots[base + i] = va / slots[b]
                elif opcode == 3:
                    slots[base + i] = _ipow(va, b)
                elif opcode == 4:
                    slots[base + i] = exp(va)
                elif opcode == 5:
                    slots[base + i] = log(va)
                elif opcode == 6:
                    slots[base + i] = sin(va)
                elif opcode == 7:
                    slots[base + i] = cos(va)
                else:
                    slots[base + i] = sqrt(va)
            for k in range(n_out):
                out[p, k] = slots[outputs[k]]
    finally:
        free(slots)
    return out_arr


cdef inline double _ipow(double x, long k) nogil:
    cdef double r = 1.0
    cdef double b = x
    cdef long e = k
    if e < 0:
        b = 1.0 / x
        e = -e
    while e > 0:
        if e & 1:
            r *= b
        b *= b
        e >>= 1
    return r


def cell_energy_gradient(u, base, offsets, coeff, ginv, weight, double eps2, double power):
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] uv = u_arr
    cdef long[::1] base_v = base
    cdef long[::1] off_v = offsets
    cdef double[:, ::1] coeff_v = coeff
    cdef double[:, :, ::1] ginv_v = ginv
    cdef double[::1] w_v = weight

    cdef Py_ssize_t n_funcs = uv.shape[0]
    cdef Py_ssize_t n_cells = base_v.shape[0]
    cdef Py_ssize_t n_corners = off_v.shape[0]
    cdef Py_ssize_t ndim = coeff_v.shape[1]

    grad_arr = np.zeros_like(u_arr)
    cdef double[:, ::1] grad = grad_arr

    cdef double energy = 0.0
    cdef Py_ssize_t c, j, a, b, s
    cdef long node
    cdef double q, sreg, dphi, ga, cv
    cdef double D[8][4]          # n_funcs, ndim capped small
    cdef double G[8][4]

    if n_funcs > 8 or ndim > 4:
        raise ValueError("native kernel supports at most 8 functions and dimension 4")

    for c in range(n_cells):
        for j in range(n_funcs):
            for a in range(ndim):
                cv = 0.0
                for s in range(n_corners):
                    cv += coeff_v[s, a] * uv[j, base_v[c] + off_v[s]]
                D[j][a] = cv
        for j in range(n_funcs):
            q = 0.0
            for a in range(ndim):
                ga = 0.0
                for b in range(ndim):
                    ga += ginv_v[c, a, b] * D[j][b]
                G[j][a] = ga
                q += ga * D[j][a]
            sreg = q + eps2
            energy += pow(sreg, power) * w_v[c]
            dphi = 2.0 * w_v[c] * power * pow(sreg, power - 1.0)
            for a in range(ndim):
                G[j][a] *= dphi
        for s in range(n_corners):
            node = base_v[c] + off_v[s]
            for j in range(n_funcs):
                cv = 0.0
                for a in range(ndim):
                    cv += coeff_v[s, a] * G[j][a]
                grad[j, node] += cv
    return energy, grad_arr
