# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot kernels.

Mirrors `calm.kernels._core_py` exactly; see that module for the contract.
Matrix products go through BLAS.  C-contiguous float64 row-major arrays are
handed to dgemv/dgemm as their column-major transposes, so every call below
works on op(A^T) views of the original operands.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm, dgemv, dger

cnp.import_array()


cdef void _relu1(double[::1] h) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(h.shape[0]):
        if h[i] < 0.0:
            h[i] = 0.0


cdef void _relu2(double[:, ::1] h) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(h.shape[0]):
        for j in range(h.shape[1]):
            if h[i, j] < 0.0:
                h[i, j] = 0.0


cdef object _affine(object w_, object b_, object x_, bint relu):
    # y = W x + b for one vector; W is (out, in) row-major.
    cdef double[:, ::1] w = w_
    cdef double[::1] x = x_
    y_ = b_.copy()
    cdef double[::1] y = y_
    cdef int fan_in = w.shape[1]
    cdef int fan_out = w.shape[0]
    cdef int inc = 1
    cdef double alpha = 1.0, beta = 1.0
    cdef char trans = b'T'
    dgemv(&trans, &fan_in, &fan_out, &alpha, &w[0, 0], &fan_in,
          &x[0], &inc, &beta, &y[0], &inc)
    if relu:
        _relu1(y)
    return y_


cdef object _affine_batch(object w_, object b_, object x_, bint relu):
    # Y = X W^T + b for a batch; X is (rows, in), Y is (rows, out).
    cdef double[:, ::1] w = w_
    cdef double[:, ::1] x = x_
    cdef int rows = x.shape[0]
    cdef int fan_in = w.shape[1]
    cdef int fan_out = w.shape[0]
    y_ = np.empty((rows, fan_out))
    cdef double[:, ::1] y = y_
    cdef double[::1] b = b_
    cdef double alpha = 1.0, beta = 0.0
    cdef char ta = b'T', tb = b'N'
    cdef Py_ssize_t i, j
    dgemm(&ta, &tb, &fan_out, &rows, &fan_in, &alpha, &w[0, 0], &fan_in,
          &x[0, 0], &fan_in, &beta, &y[0, 0], &fan_out)
    with nogil:
        for i in range(rows):
            for j in range(fan_out):
                y[i, j] += b[j]
        if relu:
            _relu2(y)
    return y_


def mlp_forward(list weights, list biases, x):
    """Evaluate the network at a single input vector."""
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t i
    h = x
    for i in range(len(weights)):
        h = _affine(weights[i], biases[i], h, i != last)
    return h


def mlp_forward_cached(list weights, list biases, x):
    """Forward pass keeping per-layer inputs for a later backward pass."""
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t i
    acts = [x]
    h = x
    for i in range(len(weights)):
        h = _affine(weights[i], biases[i], h, i != last)
        if i != last:
            acts.append(h)
    return h, acts


def mlp_backward(list weights, list acts, upstream):
    """Backpropagate an output gradient; returns (d_weights, d_biases, d_input)."""
    cdef Py_ssize_t n = len(weights)
    cdef Py_ssize_t layer
    cdef double[:, ::1] w, dw
    cdef double[::1] g, a, gp
    cdef int fan_in, fan_out, inc = 1
    cdef double alpha = 1.0, beta = 0.0
    cdef char trans = b'N'
    cdef Py_ssize_t i
    dws = [None] * n
    dbs = [None] * n
    g_ = upstream
    for layer in range(n - 1, -1, -1):
        w = weights[layer]
        fan_in = w.shape[1]
        fan_out = w.shape[0]
        a_ = acts[layer]
        a = a_
        g = g_
        dw_ = np.zeros((fan_out, fan_in))
        dw = dw_
        # dW = outer(g, a): row-major (out, in) is a g^T column-major.
        dger(&fan_in, &fan_out, &alpha, &a[0], &inc, &g[0], &inc,
             &dw[0, 0], &fan_in)
        dws[layer] = dw_
        dbs[layer] = g_.copy() if g_ is upstream else g_
        gp_ = np.empty(fan_in)
        gp = gp_
        dgemv(&trans, &fan_in, &fan_out, &alpha, &w[0, 0], &fan_in,
              &g[0], &inc, &beta, &gp[0], &inc)
        if layer > 0:
            with nogil:
                for i in range(fan_in):
                    if a[i] <= 0.0:
                        gp[i] = 0.0
        g_ = gp_
    return dws, dbs, g_


def mlp_forward_batch(list weights, list biases, xs):
    """Evaluate the network at a batch of inputs (rows of xs)."""
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t i
    h = xs
    for i in range(len(weights)):
        h = _affine_batch(weights[i], biases[i], h, i != last)
    return h


def mlp_forward_batch_cached(list weights, list biases, xs):
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t i
    acts = [xs]
    h = xs
    for i in range(len(weights)):
        h = _affine_batch(weights[i], biases[i], h, i != last)
        if i != last:
            acts.append(h)
    return h, acts


def mlp_backward_batch(list weights, list acts, upstream):
    """Batch backward; weight and bias gradients are summed over rows."""
    cdef Py_ssize_t n = len(weights)
    cdef Py_ssize_t layer
    cdef double[:, ::1] w, dw, g, a, gp
    cdef double[::1] db
    cdef int rows, fan_in, fan_out
    cdef double alpha = 1.0, beta = 0.0
    cdef char tn = b'N', tt = b'T'
    cdef Py_ssize_t i, j
    dws = [None] * n
    dbs = [None] * n
    g_ = upstream
    for layer in range(n - 1, -1, -1):
        w = weights[layer]
        fan_in = w.shape[1]
        fan_out = w.shape[0]
        a_ = acts[layer]
        a = a_
        g = g_
        rows = g.shape[0]
        dw_ = np.empty((fan_out, fan_in))
        dw = dw_
        # dW = G^T A: column-major (in, out) is A^T G.
        dgemm(&tn, &tt, &fan_in, &fan_out, &rows, &alpha, &a[0, 0], &fan_in,
              &g[0, 0], &fan_out, &beta, &dw[0, 0], &fan_in)
        dws[layer] = dw_
        db_ = np.zeros(fan_out)
        db = db_
        with nogil:
            for i in range(rows):
                for j in range(fan_out):
                    db[j] += g[i, j]
        dbs[layer] = db_
        gp_ = np.empty((rows, fan_in))
        gp = gp_
        # G_prev = G W: column-major (in, rows) is W^T G^T.
        dgemm(&tn, &tn, &fan_in, &rows, &fan_out, &alpha, &w[0, 0], &fan_in,
              &g[0, 0], &fan_out, &beta, &gp[0, 0], &fan_in)
        if layer > 0:
            with nogil:
                for i in range(rows):
                    for j in range(fan_in):
                        if a[i, j] <= 0.0:
                            gp[i, j] = 0.0
        g_ = gp_
    return dws, dbs, g_


def adam_apply(param, grad, m, v, double lr, double beta1, double beta2,
               double eps, double corr1, double corr2, double decay):
    """One Adam step, in place on param/m/v (see the numpy backend)."""
    cdef double[::1] p = param.ravel()
    cdef double[::1] g = grad.ravel()
    cdef double[::1] mm = m.ravel()
    cdef double[::1] vv = v.ravel()
    cdef Py_ssize_t i
    cdef double gi
    with nogil:
        for i in range(p.shape[0]):
            gi = g[i]
            if decay != 0.0:
                p[i] *= 1.0 - lr * decay
            mm[i] = beta1 * mm[i] + (1.0 - beta1) * gi
            vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi
            p[i] -= lr * (mm[i] / corr1) / ((vv[i] / corr2) ** 0.5 + eps)


def gae_advantages(rewards, values, double bootstrap, double gamma, double lam):
    """Generalized advantage estimation by the standard backward recursion."""
    cdef double[::1] r = rewards
    cdef double[::1] val = values
    cdef Py_ssize_t steps = r.shape[0]
    adv_ = np.empty(steps)
    cdef double[::1] adv = adv_
    cdef double acc = 0.0, nxt, delta
    cdef Py_ssize_t t
    with nogil:
        for t in range(steps - 1, -1, -1):
            nxt = bootstrap if t == steps - 1 else val[t + 1]
            delta = r[t] + gamma * nxt - val[t]
            acc = delta + gamma * lam * acc
            adv[t] = acc
    return adv_, adv_ + values
