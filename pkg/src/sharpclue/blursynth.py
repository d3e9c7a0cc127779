"""Synthetic handheld-blur video generation with embedded sharp frames.

High-frame-rate sharp footage is averaged in the linear-sensor domain
over sliding windows; the number of averaged frames per window grows
with the camera's movement distance during that window, so slow/stabilized
stretches yield sharp output frames (a single sample) while fast motion
yields heavy blur. Without real footage, a procedural generator renders
seeded noise textures moved along a synthetic trajectory whose velocity
is zeroed below a stabilization threshold, mimicking optical image
stabilization kicking in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .kernels import bilinear_sample
from .vidio import Sequence, save_sequence, write_frame


@dataclass
class Trajectory:
    """Per-frame rotational (rad/s) and translational (units/s) velocities."""

    rot_vel: np.ndarray    # (N, 3)
    trans_vel: np.ndarray  # (N, 3)
    dt: float

    def __post_init__(self):
        self.rot_vel = np.asarray(self.rot_vel, dtype=np.float64)
        self.trans_vel = np.asarray(self.trans_vel, dtype=np.float64)
        if self.rot_vel.shape != self.trans_vel.shape or self.rot_vel.shape[1:] != (3,):
            raise DataError("trajectory velocity arrays must both be (N, 3)")
        if not (np.all(np.isfinite(self.rot_vel)) and np.all(np.isfinite(self.trans_vel))):
            raise DataError("trajectory contains non-finite velocities")

    def __len__(self) -> int:
        return self.rot_vel.shape[0]


@dataclass
class SynthConfig:
    window: int = 11            # frames averaged per output frame at most
    norm_distance: float = 0.0  # 0 -> auto-calibrate to the median window distance
    gamma: float = 2.2
    interp_factor: int = 2
    seed: int = 0
    sequences: int = 4
    out_frames: int = 120       # output (blurry) frames per sequence
    height: int = 64
    width: int = 64
    channels: int = 3
    base_fps: float = 30.0
    speed: float = 90.0         # peak translational speed, px/s
    stabilized_fraction: float = 0.3
    split: str = "train"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.window < 1:
            raise DataError(f"window size must be >= 1, got {self.window}")
        if self.norm_distance < 0:
            raise DataError("norm_distance must be >= 0")
        if self.gamma <= 0:
            raise DataError("gamma must be > 0")
        if self.interp_factor < 1:
            raise DataError("interp_factor must be >= 1")


# ---------------------------------------------------------------------------
# camera response

def apply_crf(linear: np.ndarray, gamma: float = 2.2) -> np.ndarray:
    """Linear sensor signal to display intensity: x**(1/gamma)."""
    linear = np.asarray(linear)
    if np.any(linear < 0):
        raise DataError("apply_crf input must be non-negative")
    return linear ** (1.0 / gamma)


def invert_crf(display: np.ndarray, gamma: float = 2.2) -> np.ndarray:
    """Display intensity back to the linear domain: x**gamma."""
    display = np.asarray(display)
    if np.any(display < 0):
        raise DataError("invert_crf input must be non-negative")
    return display ** gamma


# ---------------------------------------------------------------------------
# trajectory-dependent sample counts

def frame_distances(traj: Trajectory, rot_scale: float) -> np.ndarray:
    """Per-frame movement distance combining rotation and translation.

    Rotational speed is converted to a displacement through `rot_scale`,
    a focal-length proxy in pixels (max(H, W)/2 for the render canvas).
    """
    rot_speed = np.linalg.norm(traj.rot_vel, axis=1)
    trans_speed = np.linalg.norm(traj.trans_vel, axis=1)
    return (rot_speed * rot_scale + trans_speed) * traj.dt


def window_sample_counts(distances: np.ndarray, window: int, norm_distance: float):
    """Per-window averaged-frame counts k_j, clamped to [1, window].

    Windows tile the sequence with stride `window`; trailing frames that
    do not fill a whole window are dropped. k_j == 1 marks a sharp
    output frame.
    """
    if window < 1:
        raise DataError("window must be >= 1")
    if norm_distance <= 0:
        raise DataError("norm_distance must be > 0")
    distances = np.asarray(distances, dtype=np.float64)
    n_windows = len(distances) // window
    counts = np.empty(n_windows, dtype=np.int64)
    centers = np.empty(n_windows, dtype=np.int64)
    for j in range(n_windows):
        centers[j] = j * window + window // 2
        mean_d = distances[j * window:(j + 1) * window].mean()
        k = int(round(window * mean_d / norm_distance))
        counts[j] = min(max(k, 1), window)
    return counts, centers


def synthesize_window(frames, k: int, gamma: float = 2.2) -> np.ndarray:
    """Average k frames (centered in `frames`) in the linear domain.

    `frames` is the full window; the k averaged ones sit around its
    center. k == 1 returns the center frame itself, bit-exact.
    """
    n = len(frames)
    if not 1 <= k <= n:
        raise DataError(f"k={k} exceeds available frames ({n})")
    center = n // 2
    if k == 1:
        return frames[center].copy()
    start = center - (k - 1) // 2
    start = min(max(start, 0), n - k)
    acc = np.zeros_like(frames[0], dtype=np.float64)
    for i in range(start, start + k):
        acc += invert_crf(frames[i], gamma)
    return apply_crf(acc / k, gamma)


def upsample_linear(frames, factor: int):
    """Temporal upsampling by linear blending of neighboring frames."""
    if factor < 1:
        raise DataError("interp factor must be >= 1")
    if factor == 1 or len(frames) < 2:
        return list(frames)
    out = []
    for i in range(len(frames) - 1):
        a, b = frames[i], frames[i + 1]
        for s in range(factor):
            t = s / factor
            out.append(a if s == 0 else (1.0 - t) * a + t * b)
    out.append(frames[-1])
    return out


# ---------------------------------------------------------------------------
# procedural scenes

def _noise_texture(rng: np.random.Generator, height: int, width: int,
                   channels: int) -> np.ndarray:
    """Seeded multi-octave value noise in [0, 1], shape (H, W, C).

    Octave count scales with the canvas so the finest detail sits near
    the pixel scale; blur must visibly destroy it.
    """
    tex = np.zeros((height, width, channels))
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    octaves = max(3, int(math.log2(min(height, width))) - 1)
    amp_total = 0.0
    for o in range(octaves):
        cells = 4 * 2 ** o
        grid = rng.random((cells + 2, cells + 2, channels))
        amp = 0.7 ** o
        gx = xs * cells / width
        gy = ys * cells / height
        for c in range(channels):
            tex[:, :, c] += amp * bilinear_sample(grid[:, :, c], gx, gy)
        amp_total += amp
    tex /= amp_total
    lo, hi = tex.min(), tex.max()
    return (tex - lo) / (hi - lo) if hi > lo else tex


def make_trajectory(rng: np.random.Generator, n_frames: int, dt: float,
                    speed: float, stabilized_fraction: float,
                    window: int) -> Trajectory:
    """Smooth sinusoidal shake with whole windows zeroed out (OIS-style).

    Velocities are clamped to zero on roughly `stabilized_fraction` of
    the windows so that sharp and blurry output frames coexist.
    """
    t = np.arange(n_frames) * dt
    freqs = rng.uniform(0.4, 1.6, size=3)
    phases = rng.uniform(0, 2 * math.pi, size=3)
    trans = np.zeros((n_frames, 3))
    trans[:, 0] = speed * np.sin(2 * math.pi * freqs[0] * t + phases[0])
    trans[:, 1] = speed * np.sin(2 * math.pi * freqs[1] * t + phases[1])
    rot = np.zeros((n_frames, 3))
    rot[:, 2] = 0.02 * speed / 40.0 * np.sin(2 * math.pi * freqs[2] * t + phases[2])

    n_windows = n_frames // window
    stabilized = rng.random(n_windows) < stabilized_fraction
    for j in np.flatnonzero(stabilized):
        trans[j * window:(j + 1) * window] = 0.0
        rot[j * window:(j + 1) * window] = 0.0
    return Trajectory(rot_vel=rot, trans_vel=trans, dt=dt)


def render_scene(rng: np.random.Generator, traj: Trajectory, height: int,
                 width: int, channels: int) -> list[np.ndarray]:
    """Render one sharp frame per trajectory step from a moving texture."""
    margin = max(height, width)
    tex = _noise_texture(rng, height + 2 * margin, width + 2 * margin, channels)
    pos = np.cumsum(traj.trans_vel * traj.dt, axis=0)
    ang = np.cumsum(traj.rot_vel[:, 2] * traj.dt)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    frames = []
    for n in range(len(traj)):
        ca, sa = math.cos(ang[n]), math.sin(ang[n])
        rel_x, rel_y = xs - cx, ys - cy
        sample_x = ca * rel_x - sa * rel_y + cx + pos[n, 0] + margin
        sample_y = sa * rel_x + ca * rel_y + cy + pos[n, 1] + margin
        frame = np.empty((height, width, channels))
        for c in range(channels):
            frame[:, :, c] = bilinear_sample(tex[:, :, c], sample_x, sample_y)
        frames.append(np.clip(frame, 0.0, 1.0))
    return frames


# ---------------------------------------------------------------------------
# dataset generation

def synthesize_sequence(sharp_hr: list[np.ndarray], traj: Trajectory,
                        config: SynthConfig):
    """High-rate sharp frames -> (blurry frames, ground truth, sharp labels, D)."""
    if len(sharp_hr) != len(traj):
        raise DataError("trajectory length must match high-rate frame count")
    rot_scale = max(config.height, config.width) / 2.0
    distances = frame_distances(traj, rot_scale)
    norm_d = config.norm_distance
    if norm_d <= 0:
        window_means = [
            distances[j * config.window:(j + 1) * config.window].mean()
            for j in range(len(distances) // config.window)
        ]
        positive = [d for d in window_means if d > 0]
        norm_d = float(np.median(positive)) if positive else 1.0
    counts, centers = window_sample_counts(distances, config.window, norm_d)

    blurry, gt, sharp_labels = [], [], set()
    for j, (k, m) in enumerate(zip(counts, centers)):
        window_frames = sharp_hr[j * config.window:(j + 1) * config.window]
        blurry.append(synthesize_window(window_frames, int(k), config.gamma))
        gt.append(sharp_hr[m])
        if k == 1:
            sharp_labels.add(j)
    return blurry, gt, sharp_labels, norm_d


def generate_dataset(config: SynthConfig, out_dir: Path | str,
                     source: list[Sequence] | None = None) -> list[Path]:
    """Write blurry sequences, ground-truth center frames and sharp labels.

    With no `source`, procedural scenes are rendered. Each sequence's RNG
    stream derives from (seed, sequence index), so per-sequence work is
    order-independent and the output is byte-identical for a fixed seed.
    """
    out_root = Path(out_dir) / config.split
    seq_dirs = []
    if source is not None and len(source) == 0:
        raise DataError("empty source sequence list")

    n_seqs = len(source) if source is not None else config.sequences
    for s in range(n_seqs):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, s]))
        n_hr = config.out_frames * config.window
        dt_hr = 1.0 / (config.base_fps * config.interp_factor)
        if source is not None:
            base = source[s].frames
            sharp_hr = upsample_linear(base, config.interp_factor)[:n_hr]
            n_hr = len(sharp_hr)
            traj = make_trajectory(rng, n_hr, dt_hr, config.speed,
                                   config.stabilized_fraction, config.window)
        else:
            traj = make_trajectory(rng, n_hr, dt_hr, config.speed,
                                   config.stabilized_fraction, config.window)
            sharp_hr = render_scene(rng, traj, config.height, config.width,
                                    config.channels)
        if not sharp_hr:
            raise DataError("source sequence produced no frames")

        blurry, gt, labels, norm_d = synthesize_sequence(sharp_hr, traj, config)
        out_fps = config.base_fps * config.interp_factor / config.window
        seq = Sequence(frames=blurry, fps=out_fps, sharp_labels=labels,
                       meta={"exposure": repr(config.window * dt_hr),
                             "norm_distance": repr(norm_d)})
        seq_dir = out_root / f"seq_{s:03d}"
        save_sequence(seq, seq_dir)
        for i, frame in enumerate(gt):
            write_frame(frame, seq_dir / "gt" / (f"frame_{i:06d}.png"))
        seq_dirs.append(seq_dir)
    return seq_dirs
