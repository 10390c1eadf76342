# cython: boundscheck=False, wraparound=False, initializedcheck=False, language_level=3
"""Compiled hot-loop kernels.

Expression-for-expression mirror of ``_kernels_py.py``, built with FP
contraction disabled (see setup.py) so both backends round identically at
every operation and return bitwise equal doubles. Edit the two files
together or not at all.
"""

import numpy as np


def branch_stats(double pi_root, double[:, ::1] dnu, double delta,
                 double b_minus_r, double gamma, double r):
    """Per-branch (lr, s2, s3) over the rows of an innovation matrix."""
    cdef Py_ssize_t m = dnu.shape[0]
    cdef Py_ssize_t nb = dnu.shape[1]
    lr_arr = np.zeros(m)
    s2_arr = np.zeros(m)
    s3_arr = np.zeros(m)
    cdef double[::1] lr = lr_arr
    cdef double[::1] s2 = s2_arr
    cdef double[::1] s3 = s3_arr
    cdef double d0
    cdef Py_ssize_t i, l
    cdef double pi, dpi, lri, s2i, s3i, dn, th, sig
    if 0.0 <= pi_root <= 1.0:
        d0 = gamma * pi_root * (1.0 - pi_root)
    else:
        d0 = 0.0
    with nogil:
        for i in range(m):
            pi = pi_root
            dpi = d0
            lri = 0.0
            s2i = 0.0
            s3i = 0.0
            for l in range(nb):
                dn = dnu[i, l]
                th = b_minus_r + gamma * pi
                s2i = s2i + dpi * dn
                s3i = s3i + delta * (th * dpi)
                lri = lri - (th * dn + delta * (r + 0.5 * (th * th)))
                dpi = dpi + gamma * ((1.0 - 2.0 * pi) * (dpi * dn))
                if 0.0 <= pi <= 1.0:
                    sig = gamma * pi * (1.0 - pi)
                else:
                    sig = 0.0
                pi = pi + sig * dn
            lr[i] = lri
            s2[i] = s2i
            s3[i] = s3i
    return lr_arr, s2_arr, s3_arr


def example_branch_stats(double w_root, double[:, ::1] dw, double delta):
    """Per-branch (logr, bracket) for the closed-form benchmark problem."""
    cdef Py_ssize_t m = dw.shape[0]
    cdef Py_ssize_t nb = dw.shape[1]
    logr_arr = np.zeros(m)
    bracket_arr = np.zeros(m)
    cdef double[::1] logr = logr_arr
    cdef double[::1] bracket = bracket_arr
    cdef Py_ssize_t i, l
    cdef double w, lri, isum, d, ow
    with nogil:
        for i in range(m):
            w = w_root
            lri = 0.0
            isum = 0.0
            for l in range(nb):
                d = dw[i, l]
                ow = 1.0 + w
                lri = lri + (2.0 * (ow * d) - 2.0 * delta * (ow * ow))
                isum = isum + delta * ow
                w = w + d
            logr[i] = lri
            bracket[i] = 2.0 * w - 4.0 * isum + 2.0
    return logr_arr, bracket_arr
