"""Frame/sequence/flow data types and bit-exact on-disk formats.

Conventions fixed project-wide:

* frames are float arrays of shape ``(H, W, C)`` with ``C`` in {1, 3},
  values in the display domain ``[0, 1]`` (8-bit files divided by 255);
* flow fields are ``(H, W, 2)`` with ``[..., 0]`` the x (column,
  rightward) displacement and ``[..., 1]`` the y (row, downward)
  displacement, origin at the top-left pixel;
* masks and confidence maps are ``(H, W)`` floats in ``[0, 1]``.

Dataset layout on disk: ``<root>/<split>/<seq_id>/frame_%06d.png`` plus
optional ``sharp.txt`` (one sharp frame index per line) and ``meta.txt``
(``key=value`` lines: fps, exposure).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError

FRAME_PATTERN = "frame_%06d.png"
FLO_SENTINEL = 202021.25


@dataclass
class Sequence:
    """An ordered stack of same-shape frames with optional sharp labels."""

    frames: list[np.ndarray]
    fps: float = 30.0
    sharp_labels: set[int] | None = None
    segment_len: int = 20
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.segment_len < 2:
            raise DataError(f"segment_len must be >= 2, got {self.segment_len}")
        shapes = {f.shape for f in self.frames}
        if len(shapes) > 1:
            raise DataError(f"inconsistent frame shapes: {sorted(shapes)}")
        if self.sharp_labels is not None:
            bad = [i for i in self.sharp_labels if not 0 <= i < len(self.frames)]
            if bad:
                raise DataError(f"sharp label indices out of range: {bad}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self):
        return self.frames[0].shape


def validate_frame(frame: np.ndarray) -> np.ndarray:
    """Check the frame invariants; returns the array unchanged."""
    if frame.ndim != 3 or frame.shape[2] not in (1, 3):
        raise DataError(f"frame must be (H, W, 1|3), got {frame.shape}")
    if frame.shape[0] <= 0 or frame.shape[1] <= 0:
        raise DataError(f"frame dims must be positive, got {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise DataError("frame contains non-finite values")
    if frame.min() < 0.0 or frame.max() > 1.0:
        raise DataError("frame values outside [0, 1]")
    return frame


def coordinate_map(height: int, width: int, dtype=np.float64) -> np.ndarray:
    """Per-pixel absolute coordinates: ``[..., 0]`` = x, ``[..., 1]`` = y."""
    ys, xs = np.mgrid[0:height, 0:width]
    return np.stack([xs, ys], axis=-1).astype(dtype)


def luminance(frame: np.ndarray) -> np.ndarray:
    """ITU-R 601 luminance plane (H, W) of an (H, W, C) frame."""
    if frame.shape[-1] == 1:
        return frame[..., 0]
    return 0.299 * frame[..., 0] + 0.587 * frame[..., 1] + 0.114 * frame[..., 2]


# ---------------------------------------------------------------------------
# frame files

def read_frame(path: Path | str) -> np.ndarray:
    """Load an 8-bit image file as an (H, W, C) float array in [0, 1]."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise DataError(f"missing frame file: {path}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def write_frame(frame: np.ndarray, path: Path | str) -> None:
    """Quantize to 8-bit and write losslessly; save(load(x)) is byte-stable."""
    data = np.clip(np.rint(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    mode = "L" if data.ndim == 2 else "RGB"
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data, mode=mode).save(path)


def _parse_manifest(path: Path, n_frames: int) -> set[int]:
    labels = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            idx = int(line)
        except ValueError:
            raise DataError(f"bad manifest line in {path}: {line!r}")
        if not 0 <= idx < n_frames:
            raise DataError(f"manifest index {idx} out of range in {path}")
        labels.add(idx)
    return labels


def _parse_meta(path: Path) -> dict[str, str]:
    meta = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def load_sequence(path: Path | str, segment_len: int = 20) -> Sequence:
    """Load a frame directory plus its optional sharp.txt / meta.txt."""
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"sequence directory not found: {root}")
    pattern = re.compile(r"frame_(\d{6})\.png$")
    numbered = []
    for f in root.iterdir():
        m = pattern.match(f.name)
        if m:
            numbered.append((int(m.group(1)), f))
    if not numbered:
        raise DataError(f"no frame_%06d.png files in {root}")
    numbered.sort()
    frames = [read_frame(f) for _, f in numbered]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise DataError(f"inconsistent frame shapes in {root}: {sorted(shapes)}")

    meta = _parse_meta(root / "meta.txt") if (root / "meta.txt").exists() else {}
    fps = float(meta.get("fps", 30.0))
    sharp = None
    if (root / "sharp.txt").exists():
        sharp = _parse_manifest(root / "sharp.txt", len(frames))
    return Sequence(frames=frames, fps=fps, sharp_labels=sharp,
                    segment_len=segment_len, meta=meta)


def save_sequence(seq: Sequence, path: Path | str) -> None:
    """Write frames, sharp.txt (when labels known) and meta.txt."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        write_frame(frame, root / (FRAME_PATTERN % i))
    if seq.sharp_labels is not None:
        write_manifest(seq.sharp_labels, root / "sharp.txt")
    meta = dict(seq.meta)
    meta.setdefault("fps", repr(seq.fps))
    lines = [f"{k}={v}" for k, v in sorted(meta.items())]
    (root / "meta.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(indices, path: Path | str) -> None:
    text = "\n".join(str(i) for i in sorted(indices))
    Path(path).write_text(text + "\n" if text else "", encoding="utf-8")


# ---------------------------------------------------------------------------
# Middlebury-style flow files

def write_flow(flow: np.ndarray, path: Path | str) -> None:
    """Write an (H, W, 2) flow as sentinel/width/height + float32 (u,v) pairs."""
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise DataError(f"flow must be (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        np.float32(FLO_SENTINEL).tofile(f)
        np.int32(w).tofile(f)
        np.int32(h).tofile(f)
        flow.astype("<f4").tofile(f)


def read_flow(path: Path | str) -> np.ndarray:
    """Read a flow file written by :func:`write_flow`, inverting it exactly."""
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"missing flow file: {path}")
    if len(raw) < 12:
        raise DataError(f"truncated flow file: {path}")
    sentinel = np.frombuffer(raw, "<f4", count=1)[0]
    if sentinel != np.float32(FLO_SENTINEL):
        raise DataError(f"bad flow sentinel {sentinel!r} in {path}")
    w, h = np.frombuffer(raw, "<i4", count=2, offset=4)
    expected = 12 + 8 * int(w) * int(h)
    if len(raw) != expected:
        raise DataError(f"flow file size {len(raw)} != expected {expected}: {path}")
    data = np.frombuffer(raw, "<f4", offset=12).reshape(int(h), int(w), 2)
    return data.copy()
