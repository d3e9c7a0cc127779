"""Desk-scale optical flow with confidence, warping, and alignment masks.

Flow estimation is coarse-to-fine pyramidal Lucas-Kanade: at each level
the current flow warps the destination toward the source and a dense
5x5-window least-squares solve refines it incrementally. Confidence is a
photometric-residual score exp(-|residual|/sigma). Two masks gate the
use of a warped frame as supervision: an uncertainty mask multiplying
both directions' confidences, and an occlusion mask from the
forward-backward flow round-trip error (1 = consistent/usable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .kernels import bilinear_sample
from .vidio import coordinate_map, luminance

DEFAULT_LEVELS = 4
DEFAULT_ITERS = 20
DEFAULT_CONF_SIGMA = 0.1
DEFAULT_OCC_SCALE = 2.0


@dataclass
class FlowResult:
    flow: np.ndarray        # (H, W, 2)
    confidence: np.ndarray  # (H, W) in [0, 1]


def backward_warp(img: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """out(x) = img(x + flow(x)), bilinear, edge-clamped.

    Accepts (H, W) planes, (H, W, C) frames, or (H, W, 2) maps; zero flow
    is the bit-exact identity.
    """
    if flow.shape[:2] != img.shape[:2] or flow.shape[-1] != 2:
        raise DataError(f"flow shape {flow.shape} incompatible with image {img.shape}")
    h, w = img.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xq = xs + flow[..., 0]
    yq = ys + flow[..., 1]
    if img.ndim == 2:
        return bilinear_sample(img, xq, yq)
    out = np.empty_like(img, dtype=np.float64)
    for c in range(img.shape[2]):
        out[..., c] = bilinear_sample(img[..., c], xq, yq)
    return out


def _downsample2(plane: np.ndarray) -> np.ndarray:
    smoothed = ndimage.gaussian_filter(plane, sigma=1.0, mode="nearest")
    return smoothed[::2, ::2]


def _resize_bilinear(plane: np.ndarray, height: int, width: int) -> np.ndarray:
    src_h, src_w = plane.shape
    ys = np.linspace(0, src_h - 1, height)
    xs = np.linspace(0, src_w - 1, width)
    xq, yq = np.meshgrid(xs, ys)
    return bilinear_sample(plane, xq, yq)


def _lk_refine(src: np.ndarray, dst: np.ndarray, u: np.ndarray, v: np.ndarray,
               iters: int) -> tuple[np.ndarray, np.ndarray]:
    h, w = src.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(iters):
        warped = bilinear_sample(dst, xs + u, ys + v)
        gy, gx = np.gradient(warped)
        it = warped - src
        axx = ndimage.uniform_filter(gx * gx, size=5, mode="nearest")
        axy = ndimage.uniform_filter(gx * gy, size=5, mode="nearest")
        ayy = ndimage.uniform_filter(gy * gy, size=5, mode="nearest")
        bx = ndimage.uniform_filter(gx * it, size=5, mode="nearest")
        by = ndimage.uniform_filter(gy * it, size=5, mode="nearest")
        reg = 1e-4 * float(np.mean(axx + ayy)) + 1e-12
        det = (axx + reg) * (ayy + reg) - axy * axy
        du = (-bx * (ayy + reg) + by * axy) / det
        dv = (-by * (axx + reg) + bx * axy) / det
        np.clip(du, -1.0, 1.0, out=du)
        np.clip(dv, -1.0, 1.0, out=dv)
        u = ndimage.gaussian_filter(u + du, sigma=0.5, mode="nearest")
        v = ndimage.gaussian_filter(v + dv, sigma=0.5, mode="nearest")
    return u, v


def estimate_flow(src: np.ndarray, dst: np.ndarray, levels: int = DEFAULT_LEVELS,
                  iters: int = DEFAULT_ITERS,
                  conf_sigma: float = DEFAULT_CONF_SIGMA) -> FlowResult:
    """Dense flow such that warp(dst, flow) approximates src, plus confidence."""
    if src.shape != dst.shape:
        raise DataError(f"frame shapes differ: {src.shape} vs {dst.shape}")
    if levels < 1:
        raise DataError("levels must be >= 1")
    src_l = luminance(src) if src.ndim == 3 else np.asarray(src, dtype=np.float64)
    dst_l = luminance(dst) if dst.ndim == 3 else np.asarray(dst, dtype=np.float64)

    pyr_src, pyr_dst = [src_l], [dst_l]
    for _ in range(levels - 1):
        if min(pyr_src[-1].shape) < 10:
            break
        pyr_src.append(_downsample2(pyr_src[-1]))
        pyr_dst.append(_downsample2(pyr_dst[-1]))

    u = np.zeros_like(pyr_src[-1])
    v = np.zeros_like(pyr_src[-1])
    for lvl in range(len(pyr_src) - 1, -1, -1):
        s, d = pyr_src[lvl], pyr_dst[lvl]
        if u.shape != s.shape:
            u = 2.0 * _resize_bilinear(u, *s.shape)
            v = 2.0 * _resize_bilinear(v, *s.shape)
        u, v = _lk_refine(s, d, u, v, iters)

    flow = np.stack([u, v], axis=-1)
    residual = np.abs(src_l - backward_warp(dst_l, flow))
    confidence = np.exp(-residual / conf_sigma)
    return FlowResult(flow=flow, confidence=confidence)


def uncertainty_mask(conf_bwd: np.ndarray, conf_fwd: np.ndarray,
                     flow_fwd: np.ndarray) -> np.ndarray:
    """Product of the reverse-direction confidence and the warped forward one."""
    if conf_bwd.shape != conf_fwd.shape:
        raise DataError("confidence map shapes differ")
    warped = backward_warp(conf_fwd, flow_fwd)
    return np.clip(conf_bwd * warped, 0.0, 1.0)


def occlusion_mask(flow_fwd: np.ndarray, flow_bwd: np.ndarray,
                   scale: float = DEFAULT_OCC_SCALE) -> np.ndarray:
    """Round-trip coordinate error mapped to [0, 1]; 1 = consistent pixel."""
    if flow_fwd.shape != flow_bwd.shape:
        raise DataError("flow shapes differ")
    if scale <= 0:
        raise DataError("scale must be > 0")
    h, w = flow_fwd.shape[:2]
    grid = coordinate_map(h, w)
    round_trip = backward_warp(backward_warp(grid, flow_bwd), flow_fwd)
    delta = np.linalg.norm(round_trip - grid, axis=-1)
    return 1.0 - np.minimum(scale * delta, 1.0)


def combined_mask(m_uncer: np.ndarray, m_occ: np.ndarray) -> np.ndarray:
    """Elementwise product of the two gating masks."""
    if m_uncer.shape != m_occ.shape:
        raise DataError("mask shapes differ")
    return m_uncer * m_occ
