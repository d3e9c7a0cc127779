"""Single entry point: synth | select | flow | train | infer | eval | ablate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every successful run writes a JSON run manifest next to its primary
output. Config files are UTF-8 ``key=value`` lines; ``#`` starts a
comment. ``SELFHVD_THREADS`` caps worker threads.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def read_config(path: Path | str) -> dict[str, str]:
    """Parse a UTF-8 key=value config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def config_hash(mapping: dict[str, str]) -> str:
    canonical = "\n".join(f"{k}={mapping[k]}" for k in sorted(mapping))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path, command: str, mapping: dict[str, str],
                   seed: int, outputs: list[str], started: float) -> Path:
    manifest = {
        "command": command,
        "config_hash": config_hash(mapping),
        "seed": seed,
        "version": __version__,
        "started_unix": round(started, 3),
        "finished_unix": round(time.time(), 3),
        "outputs": outputs,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "run_manifest.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)
    return path


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sharpclue",
                     description="Self-supervised handheld video deblurring.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic handheld-blur dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("select", help="select sharp frames in a sequence")
    p.add_argument("--seq", required=True)
    p.add_argument("--segment-len", type=int, default=20)
    p.add_argument("--emit", default=None,
                   help="manifest filename, relative to the sequence directory")

    p = sub.add_parser("flow", help="estimate optical flow between two frames")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--conf", default=None)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--iters", type=int, default=20)

    p = sub.add_parser("train", help="train the deblurring model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")

    p = sub.add_parser("infer", help="restore a sequence with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--seq", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="full-reference metrics for restored frames")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("ablate", help="train the module on/off variant grid")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="table CSV output path")
    p.add_argument("--grid", default="sevd_scscm",
                   choices=["sevd_scscm", "rscr_sis", "both"])
    return parser


# ---------------------------------------------------------------------------
# subcommands

def _cmd_synth(args) -> int:
    from .blursynth import SynthConfig, generate_dataset

    mapping = read_config(args.config)
    fields = {f.name: f.type for f in dataclasses.fields(SynthConfig)}
    kwargs = {}
    for key, value in mapping.items():
        if key not in fields or key == "extra":
            raise DataError(f"unknown synth config key: {key}")
        ftype = fields[key]
        if ftype in ("int", int):
            kwargs[key] = int(value)
        elif ftype in ("float", float):
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    config = SynthConfig(**kwargs)
    started = time.time()
    seq_dirs = generate_dataset(config, args.out)
    print(f"wrote {len(seq_dirs)} sequences under {args.out}/{config.split}")
    write_manifest(Path(args.out), "synth", mapping, config.seed,
                   [str(d) for d in seq_dirs], started)
    return EXIT_OK


def _cmd_select(args) -> int:
    from .sharpsel import select_sharp_frames, selection_accuracy
    from .vidio import load_sequence, write_manifest as write_sharp_manifest

    started = time.time()
    seq = load_sequence(args.seq, segment_len=args.segment_len)
    result = select_sharp_frames(seq, args.segment_len)
    print(f"threshold {result.threshold:.6f}  "
          f"sharp {len(result.sharp_indices)}/{len(seq)}")
    if seq.sharp_labels is not None:
        acc = selection_accuracy(result, seq.sharp_labels, len(seq))
        print(f"accuracy {acc:.4f}")
    outputs = []
    if args.emit:
        emit_path = Path(args.seq) / args.emit
        write_sharp_manifest(result.sharp_indices, emit_path)
        outputs.append(str(emit_path))
    write_manifest(Path(args.seq), "select",
                   {"segment_len": str(args.segment_len)}, 0, outputs, started)
    return EXIT_OK


def _cmd_flow(args) -> int:
    from .flowalign import estimate_flow
    from .vidio import read_frame, write_flow, write_frame

    started = time.time()
    src = read_frame(args.src)
    dst = read_frame(args.dst)
    result = estimate_flow(src, dst, levels=args.levels, iters=args.iters)
    write_flow(result.flow, args.out)
    outputs = [args.out]
    if args.conf:
        write_frame(result.confidence[:, :, None], args.conf)
        outputs.append(args.conf)
    write_manifest(Path(args.out).parent, "flow",
                   {"levels": str(args.levels), "iters": str(args.iters)},
                   0, outputs, started)
    return EXIT_OK


def _cmd_train(args) -> int:
    from .trainer import config_from_mapping, train_and_evaluate

    mapping = read_config(args.config)
    cfg = config_from_mapping(mapping)
    started = time.time()
    ckpt = Path(args.out)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    log_path = ckpt.with_suffix(".log.csv")
    result = train_and_evaluate(cfg, args.data, ckpt_path=ckpt, log_path=log_path)
    print(f"final psnr {result['psnr']:.4f} dB (blurry baseline "
          f"{result['baseline_psnr']:.4f} dB), median shift "
          f"{result['shift_px']:.3f} px, snapshot updates {result['snapshot_updates']}")
    write_manifest(ckpt.parent, "train", mapping, cfg.seed,
                   [str(ckpt), str(log_path)], started)
    return EXIT_OK


def _cmd_infer(args) -> int:
    from .deblurnet import infer_sequence, load_checkpoint
    from .vidio import load_sequence, write_frame

    started = time.time()
    model = load_checkpoint(args.ckpt)
    seq = load_sequence(args.seq)
    outputs = infer_sequence(model, seq.frames)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(outputs):
        write_frame(frame, out_dir / f"frame_{i:06d}.png")
    print(f"restored {len(outputs)} frames into {out_dir}")
    write_manifest(out_dir, "infer", {"ckpt": str(args.ckpt)}, 0,
                   [str(out_dir)], started)
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .evalkit import compare_frames, write_report_csv
    from .vidio import load_sequence

    started = time.time()
    pred = load_sequence(args.pred)
    gt = load_sequence(args.gt)
    report = compare_frames(pred.frames, gt.frames)
    write_report_csv(report, args.report)
    print(f"psnr {report.mean_psnr:.4f} dB  ssim {report.mean_ssim:.6f}  "
          f"median shift {report.median_shift:.3f} px")
    write_manifest(Path(args.report).parent, "eval", {"pred": args.pred,
                   "gt": args.gt}, 0, [args.report], started)
    return EXIT_OK


def _cmd_ablate(args) -> int:
    from .evalkit import run_ablation
    from .trainer import config_from_mapping

    mapping = read_config(args.config)
    cfg = config_from_mapping(mapping)
    started = time.time()
    rows = run_ablation(cfg, args.data, args.out, grid=args.grid)
    for row in rows:
        flags = f"sevd={row['sevd']} scscm={row['scscm']} " \
                f"rscr={row['rscr']} sis={row['sis']}"
        print(f"{flags}: psnr {row['psnr']} ssim {row['ssim']}"
              + (f"  ERROR {row['error']}" if row["error"] else ""))
    write_manifest(Path(args.out).parent, "ablate", mapping, cfg.seed,
                   [args.out], started)
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "select": _cmd_select,
    "flow": _cmd_flow,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help path
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
