"""Self-supervised training: masked reconstruction, SEVD, SCSCM, two stages.

Stage 1 supervises the model's output with the temporally closest sharp
frame, warped into place and gated by the alignment masks. Stage 2
builds harder training pairs (SEVD): sharp clues are randomly removed
from the input segment (RSCR) and, per frame, the better of the warped
sharp frame and the model's own output on the unmodified video is chosen
as the target (SIS). A spatial-consistency term (SCSCM) pulls outputs
toward a frozen snapshot of an earlier model, which is only replaced
while the latest outputs remain aligned with the input and sharper than
the snapshot's.

Targets produced by the model itself are used as constants (stop
gradient): no gradient flows into the branch that produced them.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .deblurnet import DeblurModel, ModelSnapshot, save_checkpoint
from .errors import DataError, NumericError
from .evalkit import global_shift, psnr, ssim
from .flowalign import (backward_warp, combined_mask, estimate_flow,
                        occlusion_mask, uncertainty_mask)
from .sharpsel import laplacian_variance, segment_ranges, select_sharp_frames
from .vidio import load_sequence

LOG_FIELDS = ["iter", "stage", "lr", "loss_total", "loss_rec", "loss_sevd",
              "loss_scscm", "loss_vgg", "branch_true", "branch_false",
              "snap_checked", "snap_shift", "snap_vl_new", "snap_vl_old",
              "snap_updated", "snap_iter"]


@dataclass
class TrainConfig:
    # model
    channels: int = 3
    window_radius: int = 2
    base_width: int = 32
    vgg_width: int = 16
    # optimization
    crop_size: int = 64
    batch_windows: int = 1
    lr_init: float = 1e-4
    lr_final: float = 1e-7
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    total_iters: int = 1000
    stage1_fraction: float = 0.3
    tau: float = 0.5
    lambda_scscm: float = 1.0
    beta_vgg: float = 1.0
    seed: int = 0
    scscm_max_updates: int = 2
    shift_tol: float = 0.5
    segment_len: int = 20
    eval_interval: int = 100
    # flow
    flow_levels: int = 3
    flow_iters: int = 8
    conf_sigma: float = 0.1
    occ_scale: float = 2.0
    # module toggles
    sevd: bool = True
    scscm: bool = True
    rscr: bool = True
    sis: bool = True
    retain_rec_stage2: bool = False
    norm_by_mask: bool = False
    dtype: str = "float64"

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise DataError(f"tau must be in (0, 1), got {self.tau}")
        if not 0.0 < self.stage1_fraction < 1.0:
            raise DataError("stage1_fraction must be in (0, 1)")
        if self.lr_final >= self.lr_init:
            raise DataError("lr_final must be < lr_init")

    @property
    def stage1_iters(self) -> int:
        return max(1, int(round(self.total_iters * self.stage1_fraction)))


@dataclass
class SeqData:
    frames: list[np.ndarray]  # (C, H, W) float64
    sharp: set[int]
    segments: list[tuple[int, int]] = field(default_factory=list)


def _chw(frame_hwc: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(frame_hwc.transpose(2, 0, 1))


def _hwc(frame_chw: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(frame_chw.transpose(1, 2, 0))


def load_training_data(data_dir: Path | str, segment_len: int = 20) -> list[SeqData]:
    """Load every sequence under `data_dir`; select sharp frames if unlabeled."""
    root = Path(data_dir)
    if not root.is_dir():
        raise DataError(f"training data directory not found: {root}")
    seq_dirs = sorted(d for d in root.iterdir()
                      if d.is_dir() and list(d.glob("frame_*.png")))
    if not seq_dirs:
        raise DataError(f"no sequences under {root}")
    data = []
    for d in seq_dirs:
        seq = load_sequence(d, segment_len=segment_len)
        sharp = seq.sharp_labels
        if sharp is None:
            sharp = select_sharp_frames(seq, segment_len).sharp_indices
        if not sharp:
            sharp = select_sharp_frames(seq, segment_len).sharp_indices
        data.append(SeqData(frames=[_chw(f) for f in seq.frames], sharp=set(sharp),
                            segments=segment_ranges(len(seq), segment_len)))
    return data


# ---------------------------------------------------------------------------
# supervision construction

def nearest_sharp_index(i: int, sharp: set[int]) -> int:
    """Temporally closest sharp index; ties break toward the smaller index."""
    if not sharp:
        raise DataError("empty sharp set")
    return min(sharp, key=lambda j: (abs(j - i), j))


def rscr(segment: tuple[int, int], sharp: set[int],
         rng: np.random.Generator) -> dict[int, int]:
    """Random sharp-clues removal: map of sharp index -> replacing blurry index.

    Draws l uniform in {1..L} and replaces l randomly chosen sharp frames
    by their temporally closest blurry frame (tie: the previous frame).
    A segment with no blurry frame is left untouched.
    """
    start, stop = segment
    seg_sharp = sorted(j for j in sharp if start <= j < stop)
    seg_blurry = [j for j in range(start, stop) if j not in sharp]
    if not seg_sharp or not seg_blurry:
        return {}
    l = int(rng.integers(1, len(seg_sharp) + 1))
    chosen = rng.choice(len(seg_sharp), size=l, replace=False)
    mapping = {}
    for ci in sorted(int(c) for c in chosen):
        idx = seg_sharp[ci]
        mapping[idx] = min(seg_blurry, key=lambda b: (abs(b - idx), b > idx))
    return mapping


def sis_condition(m_occ: np.ndarray, s_warped_hwc: np.ndarray,
                  r_k_hwc: np.ndarray, tau: float) -> bool:
    """Use the warped sharp frame only if alignment coverage and sharpness win."""
    return bool(float(np.mean(m_occ)) > tau
                and laplacian_variance(s_warped_hwc) > laplacian_variance(r_k_hwc))


# ---------------------------------------------------------------------------
# losses (Tensor-valued; targets and masks are constants)

def rec_loss(restored: Tensor, target_chw: np.ndarray, mask: np.ndarray,
             norm_by_mask: bool = False) -> Tensor:
    """Masked L1 between the restored frame and the warped sharp target."""
    diff = ((restored - target_chw) * mask[None]).abs()
    if norm_by_mask:
        denom = float(mask.sum()) * restored.shape[0] + 1e-12
        return diff.sum() * (1.0 / denom)
    return diff.mean()


def sevd_frame_loss(restored_tilde: Tensor, c: bool, target_sharp_chw: np.ndarray,
                    mask: np.ndarray, r_k_value_chw: np.ndarray,
                    norm_by_mask: bool = False) -> Tensor:
    """One frame of the self-enhanced loss: masked sharp branch or sg branch."""
    if c:
        return rec_loss(restored_tilde, target_sharp_chw, mask, norm_by_mask)
    return (restored_tilde - r_k_value_chw).abs().mean()


def scscm_loss(restored_tilde: Tensor, snapshot_out_chw: np.ndarray) -> Tensor:
    """L1 toward the frozen snapshot's output on the unmodified input."""
    return (restored_tilde - snapshot_out_chw).abs().mean()


class FeatureExtractor:
    """Frozen, seeded conv filters at two scales; a stand-in feature space."""

    def __init__(self, channels: int = 3, width: int = 16, seed: int = 0,
                 dtype=np.float64):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7001]))
        dtype = np.dtype(dtype)

        def filt(cin, cout):
            std = np.sqrt(2.0 / (cin * 9))
            return Tensor((rng.standard_normal((cout, cin, 3, 3)) * std).astype(dtype))

        self.w1 = filt(channels, width)
        self.b1 = Tensor(np.zeros(width, dtype=dtype))
        self.w2 = filt(width, 2 * width)
        self.b2 = Tensor(np.zeros(2 * width, dtype=dtype))

    def features(self, x: Tensor) -> list[Tensor]:
        f1 = x.conv2d(self.w1, self.b1).leaky_relu(0.1)
        f2 = f1.avg_pool2().conv2d(self.w2, self.b2).leaky_relu(0.1)
        return [f1, f2]


def _pool_mask(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    return mask[: h - h % 2, : w - w % 2].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def perceptual_loss(phi: FeatureExtractor, restored: Tensor,
                    target_chw: np.ndarray, mask: np.ndarray | None) -> Tensor:
    """Feature-space L1; masks are average-pooled to each feature resolution."""
    feats_r = phi.features(restored)
    feats_t = phi.features(Tensor(target_chw))
    total = None
    m = mask
    for k, (fr, ft) in enumerate(zip(feats_r, feats_t)):
        if k > 0 and m is not None:
            m = _pool_mask(m)
        diff = fr - ft.detach()
        if m is not None:
            diff = diff * m[None]
        term = diff.abs().mean()
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# optimizer

class Adam:
    def __init__(self, params: dict[str, Tensor], config: TrainConfig):
        self.params = params
        self.cfg = config
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def lr_at(self, iteration: int) -> float:
        cfg = self.cfg
        progress = min(iteration / max(cfg.total_iters - 1, 1), 1.0)
        return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (
            1.0 + math.cos(math.pi * progress))

    def step(self, iteration: int) -> float:
        cfg = self.cfg
        lr = self.lr_at(iteration)
        self.t += 1
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in {k} at iteration {iteration}")
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        return lr


# ---------------------------------------------------------------------------
# sampling and augmentation

def _augment(frame_chw: np.ndarray, flip_h: bool, flip_v: bool, rot_k: int) -> np.ndarray:
    x = frame_chw
    if flip_h:
        x = x[:, :, ::-1]
    if flip_v:
        x = x[:, ::-1, :]
    if rot_k:
        x = np.rot90(x, rot_k, axes=(1, 2))
    return np.ascontiguousarray(x)


@dataclass
class Sample:
    seq: SeqData
    segment: tuple[int, int]
    center: int
    crop: tuple[int, int]
    flip_h: bool
    flip_v: bool
    rot_k: int
    rng: np.random.Generator

    def frame(self, idx: int) -> np.ndarray:
        n = len(self.seq.frames)
        f = self.seq.frames[min(max(idx, 0), n - 1)]
        y, x = self.crop
        cs = min(f.shape[1] - y, f.shape[2] - x)
        return _augment(f[:, y:y + cs, x:x + cs], self.flip_h, self.flip_v, self.rot_k)


def draw_sample(data: list[SeqData], cfg: TrainConfig, iteration: int) -> Sample:
    """Deterministic per-iteration sample; RNG derived from (seed, iteration)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1000003, iteration]))
    seq = data[int(rng.integers(len(data)))]
    segment = seq.segments[int(rng.integers(len(seq.segments)))]
    center = int(rng.integers(segment[0], segment[1]))
    _, h, w = seq.frames[0].shape
    cs = min(cfg.crop_size, h, w)
    y = int(rng.integers(0, h - cs + 1))
    x = int(rng.integers(0, w - cs + 1))
    return Sample(seq=seq, segment=segment, center=center, crop=(y, x),
                  flip_h=bool(rng.integers(2)), flip_v=bool(rng.integers(2)),
                  rot_k=int(rng.integers(4)), rng=rng)


def _window(sample: Sample, radius: int, remap: dict[int, int] | None = None):
    idxs = range(sample.center - radius, sample.center + radius + 1)
    if remap:
        idxs = [remap.get(i, i) for i in idxs]
    return np.stack([sample.frame(i) for i in idxs])


def _alignment(r_value_chw: np.ndarray, sharp_chw: np.ndarray, cfg: TrainConfig):
    """Flow both ways between a restored frame and its sharp label; build masks."""
    r_hwc, s_hwc = _hwc(r_value_chw), _hwc(sharp_chw)
    fwd = estimate_flow(r_hwc, s_hwc, cfg.flow_levels, cfg.flow_iters, cfg.conf_sigma)
    bwd = estimate_flow(s_hwc, r_hwc, cfg.flow_levels, cfg.flow_iters, cfg.conf_sigma)
    s_warped = _chw(backward_warp(s_hwc, fwd.flow))
    m_uncer = uncertainty_mask(bwd.confidence, fwd.confidence, fwd.flow)
    m_occ = occlusion_mask(fwd.flow, bwd.flow, cfg.occ_scale)
    return s_warped, m_uncer, m_occ


# ---------------------------------------------------------------------------
# training loop

class Trainer:
    def __init__(self, cfg: TrainConfig, data: list[SeqData]):
        self.cfg = cfg
        self.data = data
        dtype = np.dtype(cfg.dtype)
        self.model = DeblurModel(channels=cfg.channels,
                                 window_radius=cfg.window_radius,
                                 base_width=cfg.base_width, seed=cfg.seed,
                                 dtype=dtype)
        self.phi = FeatureExtractor(channels=cfg.channels, width=cfg.vgg_width,
                                    seed=cfg.seed, dtype=dtype)
        self.adam = Adam(self.model.params, cfg)
        self.snapshot: ModelSnapshot | None = None
        self.snapshot_updates = 0
        self.val_windows: list[np.ndarray] | None = None
        self.log_rows: list[dict] = []

    # -- stage 1 ------------------------------------------------------------

    def _stage1_losses(self, sample: Sample):
        cfg = self.cfg
        window = _window(sample, cfg.window_radius)
        j = nearest_sharp_index(sample.center, sample.seq.sharp)
        sharp = sample.frame(j)
        restored = self.model.forward(window)
        s_warped, m_uncer, m_occ = _alignment(restored.data, sharp, cfg)
        mask = combined_mask(m_uncer, m_occ)
        l_rec = rec_loss(restored, s_warped, mask, cfg.norm_by_mask)
        l_vgg = perceptual_loss(self.phi, restored, s_warped, mask)
        return l_rec, l_vgg

    def step_stage1(self, iteration: int) -> dict:
        cfg = self.cfg
        rec_t, vgg_t = None, None
        for b in range(cfg.batch_windows):
            sample = draw_sample(self.data, cfg, iteration * cfg.batch_windows + b)
            l_rec, l_vgg = self._stage1_losses(sample)
            rec_t = l_rec if rec_t is None else rec_t + l_rec
            vgg_t = l_vgg if vgg_t is None else vgg_t + l_vgg
        scale = 1.0 / cfg.batch_windows
        total = (rec_t + cfg.beta_vgg * vgg_t) * scale
        self._check_finite(total, iteration)
        self.model.zero_grads()
        total.backward()
        lr = self.adam.step(iteration)
        return {"iter": iteration, "stage": 1, "lr": f"{lr:.8e}",
                "loss_total": f"{total.item():.8e}",
                "loss_rec": f"{rec_t.item() * scale:.8e}", "loss_sevd": "",
                "loss_scscm": "", "loss_vgg": f"{vgg_t.item() * scale:.8e}",
                "branch_true": "", "branch_false": "", "snap_checked": "",
                "snap_shift": "", "snap_vl_new": "", "snap_vl_old": "",
                "snap_updated": "", "snap_iter": ""}

    # -- stage 2 ------------------------------------------------------------

    def _stage2_losses(self, sample: Sample):
        cfg = self.cfg
        window_orig = _window(sample, cfg.window_radius)
        j = nearest_sharp_index(sample.center, sample.seq.sharp)
        sharp = sample.frame(j)

        if cfg.sevd:
            remap = rscr(sample.segment, sample.seq.sharp, sample.rng) if cfg.rscr else {}
            window_tilde = _window(sample, cfg.window_radius, remap)
            restored = self.model.forward(window_tilde)
            r_k = self.model.forward_nograd(window_orig)
            s_warped, m_uncer, m_occ = _alignment(restored.data, sharp, cfg)
            mask = combined_mask(m_uncer, m_occ)
            c = True if not cfg.sis else sis_condition(m_occ, _hwc(s_warped),
                                                       _hwc(r_k), cfg.tau)
            l_sevd = sevd_frame_loss(restored, c, s_warped, mask, r_k,
                                     cfg.norm_by_mask)
            l_vgg = perceptual_loss(self.phi, restored, s_warped if c else r_k,
                                    mask if c else None)
            l_rec = rec_loss(restored, s_warped, mask, cfg.norm_by_mask) \
                if cfg.retain_rec_stage2 else None
        else:
            restored = self.model.forward(window_orig)
            s_warped, m_uncer, m_occ = _alignment(restored.data, sharp, cfg)
            mask = combined_mask(m_uncer, m_occ)
            c = None
            l_sevd = None
            l_rec = rec_loss(restored, s_warped, mask, cfg.norm_by_mask)
            l_vgg = perceptual_loss(self.phi, restored, s_warped, mask)

        l_scscm = None
        if cfg.scscm and self.snapshot is not None:
            snap_out = self.model.snapshot_forward(self.snapshot, window_orig)
            l_scscm = scscm_loss(restored, snap_out)
        return l_rec, l_sevd, l_scscm, l_vgg, c

    def step_stage2(self, iteration: int) -> dict:
        cfg = self.cfg
        parts = {"rec": None, "sevd": None, "scscm": None, "vgg": None}
        n_true = n_false = 0
        for b in range(cfg.batch_windows):
            sample = draw_sample(self.data, cfg, iteration * cfg.batch_windows + b)
            l_rec, l_sevd, l_scscm, l_vgg, c = self._stage2_losses(sample)
            for key, term in (("rec", l_rec), ("sevd", l_sevd),
                              ("scscm", l_scscm), ("vgg", l_vgg)):
                if term is not None:
                    parts[key] = term if parts[key] is None else parts[key] + term
            if c is True:
                n_true += 1
            elif c is False:
                n_false += 1
        scale = 1.0 / cfg.batch_windows
        total = None
        for key, weight in (("rec", 1.0), ("sevd", 1.0),
                            ("scscm", cfg.lambda_scscm), ("vgg", cfg.beta_vgg)):
            if parts[key] is not None:
                term = parts[key] * (weight * scale)
                total = term if total is None else total + term
        self._check_finite(total, iteration)
        self.model.zero_grads()
        total.backward()
        lr = self.adam.step(iteration)

        snap_info = {"snap_checked": "", "snap_shift": "", "snap_vl_new": "",
                     "snap_vl_old": "", "snap_updated": "", "snap_iter": ""}
        if cfg.scscm and self.snapshot is not None and \
                (iteration + 1) % cfg.eval_interval == 0:
            snap_info = self.maybe_update_snapshot(iteration)

        def fmt(key):
            return f"{parts[key].item() * scale:.8e}" if parts[key] is not None else ""

        return {"iter": iteration, "stage": 2, "lr": f"{lr:.8e}",
                "loss_total": f"{total.item():.8e}", "loss_rec": fmt("rec"),
                "loss_sevd": fmt("sevd"), "loss_scscm": fmt("scscm"),
                "loss_vgg": fmt("vgg"), "branch_true": n_true,
                "branch_false": n_false, **snap_info}

    # -- snapshot policy ------------------------------------------------------

    def _build_val_windows(self) -> list[np.ndarray]:
        seq = self.data[0]
        t = self.cfg.window_radius
        n = len(seq.frames)
        picks = sorted({min(max(t, int(p)), n - 1 - t)
                        for p in np.linspace(t, n - 1 - t, 4)})
        windows = []
        for center in picks:
            stack = np.stack([seq.frames[min(max(center + d, 0), n - 1)]
                              for d in range(-t, t + 1)])
            windows.append(stack)
        return windows

    def maybe_update_snapshot(self, iteration: int) -> dict:
        """Replace the snapshot if the latest model is aligned and sharper."""
        cfg = self.cfg
        if self.val_windows is None:
            self.val_windows = self._build_val_windows()
        shifts, vl_new, vl_old = [], [], []
        for window in self.val_windows:
            latest = self.model.forward_nograd(window)
            snap_out = self.model.snapshot_forward(self.snapshot, window)
            center_in = window[cfg.window_radius]
            try:
                dx, dy = global_shift(_hwc(latest), _hwc(center_in))
                shifts.append(float(np.hypot(dx, dy)))
            except DataError:
                shifts.append(0.0)
            vl_new.append(laplacian_variance(_hwc(latest)))
            vl_old.append(laplacian_variance(_hwc(snap_out)))
        med_shift = float(np.median(shifts))
        mean_new, mean_old = float(np.mean(vl_new)), float(np.mean(vl_old))
        aligned = med_shift <= cfg.shift_tol
        sharper = mean_new > mean_old
        updated = aligned and sharper and self.snapshot_updates < cfg.scscm_max_updates
        if updated:
            self.snapshot = self.model.snapshot(iteration)
            self.snapshot_updates += 1
        return {"snap_checked": 1, "snap_shift": f"{med_shift:.4f}",
                "snap_vl_new": f"{mean_new:.8e}", "snap_vl_old": f"{mean_old:.8e}",
                "snap_updated": int(updated),
                "snap_iter": self.snapshot.iteration}

    # -- orchestration --------------------------------------------------------

    @staticmethod
    def _check_finite(loss: Tensor, iteration: int) -> None:
        if not np.isfinite(loss.data).all():
            raise NumericError(f"non-finite loss at iteration {iteration}")

    def train(self, log_path: Path | str | None = None) -> DeblurModel:
        cfg = self.cfg
        for it in range(cfg.stage1_iters):
            self.log_rows.append(self.step_stage1(it))
        if cfg.scscm:
            self.snapshot = self.model.snapshot(cfg.stage1_iters)
        for it in range(cfg.stage1_iters, cfg.total_iters):
            self.log_rows.append(self.step_stage2(it))
        if log_path is not None:
            self.write_log(log_path)
        return self.model

    def write_log(self, path: Path | str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=LOG_FIELDS)
            writer.writeheader()
            writer.writerows(self.log_rows)


def train_stage1(model_or_cfg, data: list[SeqData], cfg: TrainConfig | None = None):
    """Run only the stage-1 schedule; returns the Trainer for inspection."""
    cfg = cfg or model_or_cfg
    trainer = Trainer(cfg, data)
    for it in range(cfg.stage1_iters):
        trainer.log_rows.append(trainer.step_stage1(it))
    return trainer


def train_stage2(trainer: Trainer) -> Trainer:
    """Continue a stage-1 Trainer through the stage-2 schedule."""
    cfg = trainer.cfg
    if cfg.scscm and trainer.snapshot is None:
        trainer.snapshot = trainer.model.snapshot(cfg.stage1_iters)
    for it in range(cfg.stage1_iters, cfg.total_iters):
        trainer.log_rows.append(trainer.step_stage2(it))
    return trainer


# ---------------------------------------------------------------------------
# evaluation helper shared by the CLI and the ablation harness

def train_and_evaluate(cfg: TrainConfig, data_dir: Path | str,
                       ckpt_path: Path | str | None = None,
                       log_path: Path | str | None = None) -> dict:
    """Train on <data_dir>/train, evaluate on <data_dir>/test (or train)."""
    from .deblurnet import infer_sequence

    root = Path(data_dir)
    data = load_training_data(root / "train", cfg.segment_len)
    trainer = Trainer(cfg, data)
    model = trainer.train(log_path)
    if ckpt_path is not None:
        save_checkpoint(model, ckpt_path)

    eval_root = root / "test" if (root / "test").is_dir() else root / "train"
    psnrs, ssims, shifts, base_psnrs = [], [], [], []
    for seq_dir in sorted(d for d in eval_root.iterdir() if d.is_dir()):
        gt_dir = seq_dir / "gt"
        if not gt_dir.is_dir():
            continue
        seq = load_sequence(seq_dir)
        gt = load_sequence(gt_dir)
        outputs = infer_sequence(model, seq.frames)
        for out, blur, ref in zip(outputs, seq.frames, gt.frames):
            psnrs.append(psnr(out, ref))
            base_psnrs.append(psnr(blur, ref))
            ssims.append(ssim(out, ref))
            try:
                dx, dy = global_shift(out, blur)
                shifts.append(float(np.hypot(dx, dy)))
            except DataError:
                shifts.append(0.0)
    if not psnrs:
        raise DataError(f"no ground-truth sequences under {eval_root}")
    return {"psnr": float(np.mean(psnrs)), "ssim": float(np.mean(ssims)),
            "shift_px": float(np.median(shifts)),
            "baseline_psnr": float(np.mean(base_psnrs)),
            "snapshot_updates": trainer.snapshot_updates}


def config_from_mapping(mapping: dict[str, str]) -> TrainConfig:
    """Build a TrainConfig from string key=value pairs with type coercion."""
    kwargs = {}
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    for key, value in mapping.items():
        if key not in fields:
            raise DataError(f"unknown training config key: {key}")
        ftype = fields[key]
        if ftype in ("int", int):
            kwargs[key] = int(value)
        elif ftype in ("float", float):
            kwargs[key] = float(value)
        elif ftype in ("bool", bool):
            kwargs[key] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            kwargs[key] = value
    return TrainConfig(**kwargs)
