"""Pure-numpy implementations of the width-wise convolution kernels.

Shapes: x (n, rows, width), w (filters, taps), z (n, filters, rows, width - taps + 1).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_forward(x, w, b):
    win = sliding_window_view(x, w.shape[1], axis=2)
    return np.einsum("nrwj,fj->nfrw", win, w) + b[None, :, None, None]


def conv_grad_input(dz, w, width):
    n, _, rows, out_w = dz.shape
    dx = np.zeros((n, rows, width))
    for j in range(w.shape[1]):
        dx[:, :, j : j + out_w] += np.einsum("nfrw,f->nrw", dz, w[:, j])
    return dx


def conv_grad_params(x, dz, taps):
    win = sliding_window_view(x, taps, axis=2)
    dw = np.einsum("nfrw,nrwj->fj", dz, win)
    db = dz.sum(axis=(0, 2, 3))
    return dw, db
