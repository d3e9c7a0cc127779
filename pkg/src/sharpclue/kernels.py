"""Hot numeric kernels: bilinear resampling and 2-D convolution.

Each kernel has a numba ``@njit`` version and a pure-NumPy twin; the
active one is chosen per call via :func:`sharpclue.backend.use_numba`.
Convolutions use zero padding ("same" output size, odd kernels only);
resampling clamps out-of-bounds sample coordinates to the image edge.

Shapes follow the project convention: single-channel planes are
``(H, W)``, network activations are ``(C, H, W)``, conv weights are
``(Cout, Cin, kh, kw)``.
"""

from __future__ import annotations

import numpy as np

from .backend import HAS_NUMBA, use_numba

if HAS_NUMBA:
    from numba import njit, prange


# ---------------------------------------------------------------------------
# bilinear sampling

def _bilinear_sample_numpy(img: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    h, w = img.shape
    x = np.clip(xq, 0.0, w - 1.0)
    y = np.clip(yq, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


if HAS_NUMBA:

    @njit(parallel=True, cache=True)
    def _bilinear_sample_numba(img, xq, yq):  # pragma: no cover - jitted
        h, w = img.shape
        hq, wq = xq.shape
        out = np.empty((hq, wq), img.dtype)
        for i in prange(hq):
            for j in range(wq):
                x = min(max(xq[i, j], 0.0), w - 1.0)
                y = min(max(yq[i, j], 0.0), h - 1.0)
                x0 = int(np.floor(x))
                y0 = int(np.floor(y))
                x1 = min(x0 + 1, w - 1)
                y1 = min(y0 + 1, h - 1)
                fx = x - x0
                fy = y - y0
                top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
                bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
                out[i, j] = top * (1.0 - fy) + bot * fy
        return out


def bilinear_sample(img: np.ndarray, xq: np.ndarray, yq: np.ndarray) -> np.ndarray:
    """Sample a single-channel `img` at fractional coords (`xq`, `yq`).

    Coordinates clamp to the image edge; sampling at exact integer grid
    positions reproduces the pixel values bit-exactly.
    """
    if use_numba("warp"):
        return _bilinear_sample_numba(
            np.ascontiguousarray(img),
            np.ascontiguousarray(xq, dtype=img.dtype),
            np.ascontiguousarray(yq, dtype=img.dtype),
        )
    return _bilinear_sample_numpy(img, xq, yq)


# ---------------------------------------------------------------------------
# 2-D convolution (zero padding, stride 1, odd kernels)

def _pad_input(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    cin, h, wid = x.shape
    xp = np.zeros((cin, h + kh - 1, wid + kw - 1), dtype=x.dtype)
    xp[:, kh // 2:kh // 2 + h, kw // 2:kw // 2 + wid] = x
    return xp


def _im2col(xp: np.ndarray, kh: int, kw: int, h: int, wid: int) -> np.ndarray:
    cin = xp.shape[0]
    s0, s1, s2 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (cin, kh, kw, h, wid), (s0, s1, s2, s1, s2), writeable=False)
    return view.reshape(cin * kh * kw, h * wid)


def _conv2d_fwd_numpy(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    cout, cin, kh, kw = w.shape
    _, h, wid = x.shape
    cols = _im2col(_pad_input(x, kh, kw), kh, kw, h, wid)
    y = w.reshape(cout, -1) @ cols + b[:, None]
    return y.reshape(cout, h, wid)


def _conv2d_bwd_input_numpy(dy: np.ndarray, w: np.ndarray, in_shape) -> np.ndarray:
    cout, cin, kh, kw = w.shape
    _, h, wid = in_shape
    ph, pw = kh // 2, kw // 2
    dcols = (w.reshape(cout, -1).T @ dy.reshape(cout, -1)).reshape(cin, kh, kw, h, wid)
    dxp = np.zeros((cin, h + kh - 1, wid + kw - 1), dtype=dy.dtype)
    for p in range(kh):
        for q in range(kw):
            dxp[:, p:p + h, q:q + wid] += dcols[:, p, q]
    return np.ascontiguousarray(dxp[:, ph:ph + h, pw:pw + wid])


def _conv2d_bwd_weights_numpy(x: np.ndarray, dy: np.ndarray, w_shape):
    cout, cin, kh, kw = w_shape
    _, h, wid = x.shape
    cols = _im2col(_pad_input(x, kh, kw), kh, kw, h, wid)
    dw = (dy.reshape(cout, -1) @ cols.T).reshape(w_shape)
    db = dy.sum(axis=(1, 2))
    return dw, db


if HAS_NUMBA:

    @njit(parallel=True, cache=True)
    def _conv2d_fwd_numba(x, w, b):  # pragma: no cover - jitted
        cout, cin, kh, kw = w.shape
        _, h, wid = x.shape
        ph, pw = kh // 2, kw // 2
        y = np.empty((cout, h, wid), x.dtype)
        for o in prange(cout):
            for i in range(h):
                for j in range(wid):
                    acc = b[o]
                    for c in range(cin):
                        for p in range(kh):
                            ii = i + p - ph
                            if 0 <= ii < h:
                                for q in range(kw):
                                    jj = j + q - pw
                                    if 0 <= jj < wid:
                                        acc += w[o, c, p, q] * x[c, ii, jj]
                    y[o, i, j] = acc
        return y

    @njit(parallel=True, cache=True)
    def _conv2d_bwd_input_numba(dy, w, h, wid):  # pragma: no cover - jitted
        cout, cin, kh, kw = w.shape
        ph, pw = kh // 2, kw // 2
        dx = np.zeros((cin, h, wid), dy.dtype)
        for c in prange(cin):
            for i in range(h):
                for j in range(wid):
                    acc = 0.0
                    for o in range(cout):
                        for p in range(kh):
                            i0 = i - p + ph
                            if 0 <= i0 < h:
                                for q in range(kw):
                                    j0 = j - q + pw
                                    if 0 <= j0 < wid:
                                        acc += w[o, c, p, q] * dy[o, i0, j0]
                    dx[c, i, j] = acc
        return dx

    @njit(parallel=True, cache=True)
    def _conv2d_bwd_weights_numba(x, dy, kh, kw):  # pragma: no cover - jitted
        cout, h, wid = dy.shape
        cin = x.shape[0]
        ph, pw = kh // 2, kw // 2
        dw = np.zeros((cout, cin, kh, kw), x.dtype)
        db = np.zeros(cout, x.dtype)
        for o in prange(cout):
            s = 0.0
            for i in range(h):
                for j in range(wid):
                    s += dy[o, i, j]
            db[o] = s
            for c in range(cin):
                for p in range(kh):
                    for q in range(kw):
                        acc = 0.0
                        for i in range(h):
                            ii = i + p - ph
                            if 0 <= ii < h:
                                for j in range(wid):
                                    jj = j + q - pw
                                    if 0 <= jj < wid:
                                        acc += dy[o, i, j] * x[c, ii, jj]
                        dw[o, c, p, q] = acc
        return dw, db


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-size 2-D convolution of `(Cin,H,W)` input with bias."""
    if use_numba("conv"):
        return _conv2d_fwd_numba(
            np.ascontiguousarray(x), np.ascontiguousarray(w), np.ascontiguousarray(b)
        )
    return _conv2d_fwd_numpy(x, w, b)


def conv2d_backward_input(dy: np.ndarray, w: np.ndarray, in_shape) -> np.ndarray:
    """Gradient of conv2d_forward wrt its input."""
    if use_numba("conv"):
        return _conv2d_bwd_input_numba(
            np.ascontiguousarray(dy), np.ascontiguousarray(w), in_shape[1], in_shape[2]
        )
    return _conv2d_bwd_input_numpy(dy, w, in_shape)


def conv2d_backward_weights(x: np.ndarray, dy: np.ndarray, w_shape):
    """Gradients of conv2d_forward wrt weights and bias."""
    if use_numba("conv"):
        return _conv2d_bwd_weights_numba(
            np.ascontiguousarray(x), np.ascontiguousarray(dy), w_shape[2], w_shape[3]
        )
    return _conv2d_bwd_weights_numpy(x, dy, w_shape)
