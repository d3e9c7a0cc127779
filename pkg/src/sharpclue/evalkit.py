"""Full-reference metrics, global-shift measurement, and the ablation harness."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError
from .sharpsel import laplacian_variance
from .vidio import luminance

PSNR_CAP = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] frames, capped at 99."""
    if a.shape != b.shape:
        raise DataError(f"psnr shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))
    if mse <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gaussian_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x ** 2) / (2.0 * SSIM_SIGMA ** 2))
    return g / g.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    w = _gaussian_window()

    def blur(img):
        tmp = ndimage.correlate1d(img, w, axis=0, mode="nearest")
        return ndimage.correlate1d(tmp, w, axis=1, mode="nearest")

    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_x = blur(x)
    mu_y = blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean windowed SSIM (11x11 Gaussian, sigma 1.5, K1/K2 = .01/.03, L=1)."""
    if a.shape != b.shape:
        raise DataError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise DataError(f"frame smaller than SSIM window: {a.shape}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        return _ssim_plane(a, b)
    return float(np.mean([_ssim_plane(a[..., c], b[..., c])
                          for c in range(a.shape[-1])]))


def _parabolic_offset(left: float, center: float, right: float) -> float:
    denom = left - 2.0 * center + right
    if abs(denom) < 1e-12:
        return 0.0
    offset = 0.5 * (left - right) / denom
    return float(np.clip(offset, -0.5, 0.5))


def global_shift(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Sub-pixel translation (dx, dy) moving content of `a` onto `b`.

    Phase correlation with a Hann window and parabolic peak refinement;
    `global_shift(a, shift(a, d)) == d` for content shifted by `d`.
    """
    if a.shape != b.shape:
        raise DataError(f"global_shift shape mismatch: {a.shape} vs {b.shape}")
    pa = luminance(a) if a.ndim == 3 else np.asarray(a, dtype=np.float64)
    pb = luminance(b) if b.ndim == 3 else np.asarray(b, dtype=np.float64)
    if pa.max() - pa.min() <= 0 or pb.max() - pb.min() <= 0:
        raise DataError("global_shift requires non-constant inputs")
    h, wid = pa.shape
    win = np.outer(np.hanning(h), np.hanning(wid))
    fa = np.fft.fft2((pa - pa.mean()) * win)
    fb = np.fft.fft2((pb - pb.mean()) * win)
    cross = fa * np.conj(fb)
    mag = np.abs(cross)
    cross /= np.maximum(mag, 1e-12)
    corr = np.real(np.fft.ifft2(cross))

    peak = np.unravel_index(int(np.argmax(corr)), corr.shape)
    py, px = int(peak[0]), int(peak[1])
    dy_sub = _parabolic_offset(corr[(py - 1) % h, px], corr[py, px],
                               corr[(py + 1) % h, px])
    dx_sub = _parabolic_offset(corr[py, (px - 1) % wid], corr[py, px],
                               corr[py, (px + 1) % wid])
    dy = py + dy_sub
    dx = px + dx_sub
    if dy > h / 2:
        dy -= h
    if dx > wid / 2:
        dx -= wid
    return -dx, -dy


@dataclass
class MetricReport:
    psnr_per_frame: list[float] = field(default_factory=list)
    ssim_per_frame: list[float] = field(default_factory=list)
    vl_per_frame: list[float] = field(default_factory=list)
    shift_per_frame: list[float] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_per_frame)) if self.psnr_per_frame else float("nan")

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim_per_frame)) if self.ssim_per_frame else float("nan")

    @property
    def median_shift(self) -> float:
        return float(np.median(self.shift_per_frame)) if self.shift_per_frame else float("nan")


def compare_frames(pred_frames, gt_frames) -> MetricReport:
    if len(pred_frames) != len(gt_frames):
        raise DataError(f"frame counts differ: {len(pred_frames)} vs {len(gt_frames)}")
    report = MetricReport()
    for p, g in zip(pred_frames, gt_frames):
        report.psnr_per_frame.append(psnr(p, g))
        report.ssim_per_frame.append(ssim(p, g))
        report.vl_per_frame.append(laplacian_variance(p))
        try:
            dx, dy = global_shift(p, g)
            report.shift_per_frame.append(float(np.hypot(dx, dy)))
        except DataError:
            report.shift_per_frame.append(0.0)
    return report


def write_report_csv(report: MetricReport, path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "psnr", "ssim", "vl", "shift_px"])
        rows = zip(report.psnr_per_frame, report.ssim_per_frame,
                   report.vl_per_frame, report.shift_per_frame)
        for i, (p, s, v, d) in enumerate(rows):
            writer.writerow([i, f"{p:.6f}", f"{s:.6f}", f"{v:.8f}", f"{d:.4f}"])
        writer.writerow(["mean", f"{report.mean_psnr:.6f}", f"{report.mean_ssim:.6f}",
                         f"{float(np.mean(report.vl_per_frame)):.8f}",
                         f"{report.median_shift:.4f}"])


def run_ablation(base_config, data_dir: Path | str, out_csv: Path | str,
                 grid: str = "sevd_scscm") -> list[dict]:
    """Train the module on/off variants with a shared seed and tabulate them.

    `grid` is "sevd_scscm" (4 variants), "rscr_sis" (4 variants), or
    "both" (the union, deduplicated). A diverging variant is recorded
    with error text and the harness continues.
    """
    from . import trainer as trainer_mod

    if grid == "sevd_scscm":
        variants = [{"sevd": a, "scscm": b} for a in (False, True)
                    for b in (False, True)]
    elif grid == "rscr_sis":
        variants = [{"sevd": True, "scscm": True, "rscr": a, "sis": b}
                    for a in (False, True) for b in (False, True)]
    elif grid == "both":
        variants = [{"sevd": a, "scscm": b} for a in (False, True)
                    for b in (False, True)]
        variants += [{"sevd": True, "scscm": True, "rscr": a, "sis": b}
                     for a in (False, True) for b in (False, True)
                     if not (a and b)]
    else:
        raise DataError(f"unknown ablation grid: {grid}")

    rows = []
    for variant in variants:
        import dataclasses

        cfg = dataclasses.replace(base_config, **variant)
        row = {"sevd": int(cfg.sevd), "scscm": int(cfg.scscm),
               "rscr": int(cfg.rscr), "sis": int(cfg.sis)}
        try:
            result = trainer_mod.train_and_evaluate(cfg, data_dir)
            row.update(psnr=f"{result['psnr']:.4f}", ssim=f"{result['ssim']:.6f}",
                       shift_px=f"{result['shift_px']:.4f}", error="")
        except Exception as exc:  # noqa: BLE001 - divergence must not kill the grid
            row.update(psnr="nan", ssim="nan", shift_px="nan", error=str(exc))
        rows.append(row)

    with open(out_csv, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(
            f, fieldnames=["sevd", "scscm", "rscr", "sis", "psnr", "ssim",
                           "shift_px", "error"])
        writer.writeheader()
        writer.writerows(rows)
    return rows
