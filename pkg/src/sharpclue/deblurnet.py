"""Small sliding-window convolutional deblurring model.

The model maps a (2T+1)-frame window onto a restored center frame as
center + residual, where the residual comes from a 3-layer conv encoder
over the channel-stacked window and a 2-layer decoder. The final layer
is zero-initialized, so the untrained model is the exact identity on the
center frame. Snapshots are frozen deep copies of the parameters used as
gradient-free teachers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat
from .errors import DataError

CHECKPOINT_MAGIC = "tensors"


@dataclass(frozen=True)
class ModelSnapshot:
    """Immutable parameter copy tagged with the training iteration."""

    params: dict[str, np.ndarray]
    iteration: int


class DeblurModel:
    """Residual conv model over a (2T+1)-frame window.

    Parameters live in `self.params` as name -> Tensor with
    requires_grad=True; layer widths follow (in -> base -> base -> base
    -> base -> channels).
    """

    def __init__(self, channels: int = 3, window_radius: int = 2,
                 base_width: int = 32, seed: int = 0, dtype=np.float64):
        self.channels = channels
        self.window_radius = window_radius
        self.base_width = base_width
        self.seed = seed
        self.dtype = np.dtype(dtype)
        in_ch = channels * (2 * window_radius + 1)
        widths = [(in_ch, base_width), (base_width, base_width),
                  (base_width, base_width), (base_width, base_width),
                  (base_width, channels)]
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        for i, (cin, cout) in enumerate(widths):
            name = f"conv{i}"
            if i == len(widths) - 1:
                w = np.zeros((cout, cin, 3, 3), dtype=self.dtype)
            else:
                std = np.sqrt(2.0 / (cin * 9))
                w = (rng.standard_normal((cout, cin, 3, 3)) * std).astype(self.dtype)
            b = np.zeros(cout, dtype=self.dtype)
            self.params[f"{name}.weight"] = Tensor(w, requires_grad=True)
            self.params[f"{name}.bias"] = Tensor(b, requires_grad=True)
        self.n_layers = len(widths)

    @property
    def window_size(self) -> int:
        return 2 * self.window_radius + 1

    def forward(self, window: np.ndarray) -> Tensor:
        """Restore the center frame of a (2T+1, C, H, W) window."""
        return self._forward(self.params, window)

    def forward_nograd(self, window: np.ndarray) -> np.ndarray:
        """Forward pass treating the parameters as constants (no graph)."""
        frozen = {k: Tensor(p.data) for k, p in self.params.items()}
        return self._forward(frozen, window).data

    def _forward(self, params: dict[str, Tensor], window: np.ndarray) -> Tensor:
        window = np.asarray(window, dtype=self.dtype)
        if window.ndim != 4 or window.shape[0] != self.window_size:
            raise DataError(
                f"window must be ({self.window_size}, C, H, W), got {window.shape}")
        center = Tensor(window[self.window_radius])
        x = concat([Tensor(window[t]) for t in range(self.window_size)], axis=0)
        for i in range(self.n_layers):
            x = x.conv2d(params[f"conv{i}.weight"], params[f"conv{i}.bias"])
            if i < self.n_layers - 1:
                x = x.leaky_relu(0.1)
        return center + x

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

    def param_values(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_param_values(self, values: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            if k not in values:
                raise DataError(f"missing parameter {k}")
            if values[k].shape != p.data.shape:
                raise DataError(f"shape mismatch for {k}: "
                                f"{values[k].shape} vs {p.data.shape}")
            p.data = values[k].astype(self.dtype)

    # -- snapshots ----------------------------------------------------------

    def snapshot(self, iteration: int) -> ModelSnapshot:
        return ModelSnapshot(params=self.param_values(), iteration=iteration)

    def snapshot_forward(self, snap: ModelSnapshot, window: np.ndarray) -> np.ndarray:
        """Forward through frozen snapshot parameters; no gradients recorded."""
        frozen = {k: Tensor(v) for k, v in snap.params.items()}
        return self._forward(frozen, window).data


def infer_sequence(model: DeblurModel, frames: list[np.ndarray]) -> list[np.ndarray]:
    """Run the model over every frame with replicate padding at the ends.

    Frames are (H, W, C); outputs are clamped to [0, 1] for export.
    """
    t = model.window_radius
    n = len(frames)
    chw = [np.ascontiguousarray(f.transpose(2, 0, 1)) for f in frames]
    outputs = []
    for i in range(n):
        window = np.stack([chw[min(max(i + d, 0), n - 1)] for d in range(-t, t + 1)])
        out = model.forward(window).data
        outputs.append(np.clip(out.transpose(1, 2, 0), 0.0, 1.0))
    return outputs


# ---------------------------------------------------------------------------
# checkpoint format: text header (name + shape per line), float32 payload

def save_checkpoint(model: DeblurModel, path: Path | str) -> None:
    names = sorted(model.params)
    header = [f"{CHECKPOINT_MAGIC} {len(names)}"]
    header.append(f"# channels={model.channels}")
    header.append(f"# window_radius={model.window_radius}")
    header.append(f"# base_width={model.base_width}")
    header.append(f"# seed={model.seed}")
    for name in names:
        shape = " ".join(str(d) for d in model.params[name].data.shape)
        header.append(f"{name} {shape}")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n\n").encode("utf-8"))
        for name in names:
            f.write(model.params[name].data.astype("<f4").tobytes())


def load_checkpoint(path: Path | str, dtype=np.float64) -> DeblurModel:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"missing checkpoint: {path}")
    try:
        split = raw.index(b"\n\n")
    except ValueError:
        raise DataError(f"malformed checkpoint header: {path}")
    lines = raw[:split].decode("utf-8").splitlines()
    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC):
        raise DataError(f"bad checkpoint magic in {path}")
    n_tensors = int(lines[0].split()[1])
    meta = {}
    entries = []
    for line in lines[1:]:
        if line.startswith("#"):
            key, value = line[1:].strip().split("=", 1)
            meta[key] = value
        else:
            parts = line.split()
            entries.append((parts[0], tuple(int(d) for d in parts[1:])))
    if len(entries) != n_tensors:
        raise DataError(f"checkpoint lists {len(entries)} tensors, header says {n_tensors}")

    model = DeblurModel(channels=int(meta.get("channels", 3)),
                        window_radius=int(meta.get("window_radius", 2)),
                        base_width=int(meta.get("base_width", 32)),
                        seed=int(meta.get("seed", 0)), dtype=dtype)
    payload = raw[split + 2:]
    offset = 0
    values = {}
    for name, shape in entries:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if offset + nbytes > len(payload):
            raise DataError(f"truncated checkpoint payload: {path}")
        values[name] = np.frombuffer(payload, "<f4", count=count,
                                     offset=offset).reshape(shape).astype(dtype)
        offset += nbytes
    if offset != len(payload):
        raise DataError(f"checkpoint payload has {len(payload) - offset} trailing bytes")
    model.load_param_values(values)
    return model
