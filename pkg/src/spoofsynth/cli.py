"""Command-line entry point: ``spoofsynth <command> [options]``.

Failures print one line ``ERROR <category> <type>: <message>`` to stderr and
exit with 2 (usage), 3 (data) or 4 (runtime).  Each command writes a
``manifest.json`` next to its outputs.
"""
import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .exceptions import BadFormat, DataError, RuntimeFailure, SpoofSynthError, UsageError

logger = logging.getLogger("spoofsynth")

EXIT_CODES = {"UsageError": 2, "DataError": 3, "RuntimeFailure": 4}
MANIFEST = "manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --- config and manifest ---------------------------------------------------------

def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise BadFormat(f"cannot read JSON {path}: {exc}") from exc


def _resolve(args, defaults, file_cfg):
    """Flag > config file > built-in default, per option."""
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else file_cfg.get(key, default)
    return out


def _fingerprint(obj):
    blob = json.dumps(obj, sort_keys=True, ensure_ascii=True).encode("ascii")
    return "sha256:" + hashlib.sha256(blob).hexdigest()[:16]


def write_manifest(out_dir, command, config, inputs, outputs, started, seed=None):
    manifest = {
        "command": command,
        "config": config,
        "config_fingerprint": _fingerprint(config),
        "seed": seed,
        "tool_version": __version__,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                                    encoding="utf-8")
    return manifest


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


# --- commands --------------------------------------------------------------------

def cmd_make_corpus(args):
    from .audio.synthetic import make_synthetic_corpus

    started = _now()
    entries = make_synthetic_corpus(args.out, rate=args.rate, seed=args.seed)
    write_manifest(args.out, "make-corpus", {"rate": args.rate, "seed": args.seed}, {},
                   {"corpus": args.out}, started, args.seed)
    print(f"wrote {len(entries)} utterances to {args.out}")


PREPARE_DEFAULTS = {"rate": 16000, "peak_dbfs": -3.0, "seed": 0}


def cmd_prepare_data(args):
    from .audio.corpus import prepare_corpus

    started = _now()
    cfg = _resolve(args, PREPARE_DEFAULTS, _read_json(args.config) if args.config else {})
    train, valid = prepare_corpus(args.in_dir, args.out, cfg["rate"], cfg["peak_dbfs"], cfg["seed"])
    write_manifest(args.out, "prepare-data", cfg, {"corpus": args.in_dir},
                   {"prepared": args.out}, started, cfg["seed"])
    print(f"prepared {len(train) + len(valid)} utterances: {len(train)} train, {len(valid)} valid")


def cmd_train(args):
    import dataclasses

    import torch

    from .audio.corpus import read_metadata, read_split
    from .audio.spectrogram import SpectrogramParams
    from .frontend import TextFrontend
    from .model import ModelConfig
    from .ssl import SSLConfig, load_pretrained
    from .training import (TrainConfig, TrainState, build_dataset, load_checkpoint,
                           load_config_file, save_checkpoint, train)

    started = _now()
    if args.config:
        model_cfg, ssl_cfg, train_cfg = load_config_file(args.config)
    else:
        model_cfg, ssl_cfg, train_cfg = ModelConfig(), SSLConfig(), TrainConfig()
    overrides = {k: v for k, v in {"steps": args.steps, "seed": args.seed,
                                   "learning_rate": args.lr, "batch_size": args.batch_size}.items()
                 if v is not None}
    if args.no_ssl:
        overrides["use_ssl"] = False
    if args.constraint_weight is not None:
        overrides["weights"] = dataclasses.replace(train_cfg.weights, constraint=args.constraint_weight)
    train_cfg = dataclasses.replace(train_cfg, **overrides)

    data = Path(args.data)
    entries = read_split(data, "train") if (data / "train.txt").is_file() else read_metadata(data)
    speakers = sorted({e.speaker_id for e in read_metadata(data)})
    frontend = TextFrontend().fit()
    spec_params = SpectrogramParams()
    if args.resume:
        state = load_checkpoint(args.resume, frontend.table_.version, spec_params)
        state.train_cfg = dataclasses.replace(state.train_cfg, steps=train_cfg.steps)
    else:
        ssl = load_pretrained(args.ssl_weights, ssl_cfg) if args.ssl_weights else None
        state = TrainState(model_cfg, ssl_cfg, train_cfg, spec_params, speakers,
                           frontend.table_.version, ssl)
    torch.set_num_threads(max(1, torch.get_num_threads()))
    dataset = build_dataset(entries, frontend, spec_params, state.speakers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    loss_path = out / "losses.csv"
    with open(loss_path, "w", encoding="utf-8", newline="") as fh:
        writer = None

        def log_row(st, losses):
            nonlocal writer
            row = {"step": st.step, **losses.as_dict()}
            if writer is None:
                writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
                writer.writeheader()
            writer.writerow(row)

        history = train(state, dataset, train_cfg.steps, log_every=args.log_every, callback=log_row)
    ckpt = out / "checkpoint.ckpt"
    save_checkpoint(state, ckpt)
    config = {"model": state.model_cfg.to_dict(), "ssl": state.ssl_cfg.to_dict(),
              "train": state.train_cfg.to_dict(), "spec": spec_params.to_dict()}
    write_manifest(out, "train", config, {"data": data, "config": args.config or "",
                                          "resume": args.resume or ""},
                   {"checkpoint": ckpt, "losses": loss_path}, started, state.train_cfg.seed)
    if history:
        last = history[-1]
        print(f"trained {len(history)} steps to step {state.step}; "
              f"total_g={last.total_g:.4f} mel_recon={last.mel_recon:.4f}; checkpoint {ckpt}")


SYNTH_DEFAULTS = {"speaker": "0", "ns": 0.667, "nsd": 0.8, "seed": 0, "length_scale": 1.0,
                  "peak_dbfs": -3.0}
METRIC_FIELDS = ("utt_id", "duration_s", "silence_ratio", "phonemes_per_second")


def _read_lines(path):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise BadFormat(f"cannot read {path}: {exc}") from exc
    return [line.strip() for line in lines if line.strip()]


def cmd_synth(args):
    from .audio.clip import write_wav
    from .estimators import SpoofSynthesizer

    started = _now()
    cfg = _resolve(args, SYNTH_DEFAULTS, _read_json(args.config) if args.config else {})
    texts = _read_lines(args.text_file)
    if not texts:
        raise DataError(f"{args.text_file} has no text lines")
    voice = SpoofSynthesizer(args.ckpt, cfg["ns"], cfg["nsd"], str(cfg["speaker"]), cfg["seed"],
                             cfg["length_scale"], cfg["peak_dbfs"]).fit()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        for i, text in enumerate(texts):
            result = voice.synthesize(text, index=i)
            utt = f"utt_{i:05d}"
            write_wav(out / f"{utt}.wav", result.clip)
            writer.writerow([utt, f"{result.clip.duration:.6f}", f"{result.silence_ratio:.6f}",
                             f"{result.phonemes_per_second:.6f}"])
    write_manifest(out, "synth", cfg, {"checkpoint": args.ckpt, "text_file": args.text_file},
                   {"audio": out, "metrics": metrics_path}, started, cfg["seed"])
    print(f"synthesized {len(texts)} utterances into {out}")


def _load_sweep(path):
    from .evaluation import SweepConfig

    raw = _read_json(path)
    base = Path(path).parent
    if "text_file" in raw:
        raw["texts"] = _read_lines(base / raw.pop("text_file"))
    for row in raw.get("rows", []):
        if row.get("ckpt") and not Path(row["ckpt"]).is_absolute():
            row["ckpt"] = str(base / row["ckpt"])
    raw.setdefault("speakers", ["0"])
    try:
        return SweepConfig.from_dict(raw), raw
    except (KeyError, TypeError) as exc:
        raise BadFormat(f"{path}: malformed sweep: {exc}") from exc


def cmd_evaluate(args):
    from .estimators import SpoofSynthesizer
    from .evaluation import make_detector, run_sweep

    started = _now()
    sweep, raw = _load_sweep(args.sweep)
    if not sweep.texts:
        raise DataError(f"{args.sweep} lists no texts")
    real = Path(args.real)
    if not real.is_dir():
        raise BadFormat(f"no such directory: {real}")
    if (real / "wav").is_dir():
        real = real / "wav"
    voices = {}

    def load_voice(ckpt):
        if ckpt not in voices:
            voices[ckpt] = SpoofSynthesizer(ckpt).fit()
        return voices[ckpt]

    out = Path(args.out)
    report = run_sweep(sweep, real, make_detector(args.detector), out / "audio", load_voice)
    report_path = out / "report.csv"
    report.write_csv(report_path)
    write_manifest(out, "evaluate", {"sweep": raw, "detector": args.detector},
                   {"sweep": args.sweep, "real": real}, {"report": report_path}, started, sweep.seed)
    print(report.format_table())
    failed = [r.label for r in report.rows if r.failed]
    if failed and len(failed) == len(report.rows):
        raise RuntimeFailure(f"every sweep row failed: {failed}")


def cmd_frontend(args):
    from .frontend import TextFrontend, normalize_text

    started = _now()
    if (args.text is None) == (args.text_file is None):
        raise UsageError("give exactly one of --text or --text-file")
    texts = [args.text] if args.text is not None else _read_lines(args.text_file)
    fe = TextFrontend().fit()
    lines = []
    for text in texts:
        norm = normalize_text(text)
        seq = fe.phonemize(text)
        lines.append("".join(norm.chars))
        lines.append(seq.pinyin())
        if args.ids:
            lines.append(" ".join(map(str, seq.ids)))
    print("\n".join(lines))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "frontend.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_manifest(out, "frontend", {"ids": args.ids, "symbol_table": fe.table_.version},
                       {"text_file": args.text_file or ""}, {"frontend": out / "frontend.txt"},
                       started)


def cmd_report(args):
    from .evaluation import EvalReport

    started = _now()
    paths = args.inputs
    rows = []
    for p in paths:
        rows.extend(EvalReport.read_csv(p).rows)
    report = EvalReport(tuple(rows))
    print(report.format_table())
    best = report.best()
    print(f"best: {best.label} (EER {best.eer_percent:.3f}%)")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        report.write_csv(out)
        write_manifest(out.parent, "report", {"inputs": [str(p) for p in paths]},
                       {f"report{i}": p for i, p in enumerate(paths)}, {"report": out}, started)


# --- parser and dispatch ---------------------------------------------------------

def build_parser():
    p = _Parser(prog="spoofsynth", description="Mandarin TTS spoofing toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("make-corpus", help="write the 16-utterance synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--rate", type=int, default=44100)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_make_corpus)

    s = sub.add_parser("prepare-data", help="resample, normalize and split a corpus")
    s.add_argument("--in", dest="in_dir", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--rate", type=int)
    s.add_argument("--peak-dbfs", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.set_defaults(func=cmd_prepare_data)

    s = sub.add_parser("train", help="train a model on a prepared corpus")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--no-ssl", action="store_true")
    s.add_argument("--ssl-weights", help="pretrained extractor weights file")
    s.add_argument("--resume", help="checkpoint to continue from")
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--constraint-weight", type=float)
    s.add_argument("--log-every", type=int, default=20)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("synth", help="synthesize one utterance per text line")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--text-file", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--speaker")
    s.add_argument("--ns", type=float)
    s.add_argument("--nsd", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--length-scale", type=float)
    s.add_argument("--peak-dbfs", type=float)
    s.add_argument("--config")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("evaluate", help="run a noise-scale sweep and compute EERs")
    s.add_argument("--sweep", required=True)
    s.add_argument("--real", required=True)
    s.add_argument("--detector", default="stub", help="'stub' or an external command")
    s.add_argument("--out", default="eval")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("frontend", help="show normalization and pinyin for text")
    s.add_argument("--text")
    s.add_argument("--text-file")
    s.add_argument("--ids", action="store_true", help="also print symbol IDs")
    s.add_argument("--out")
    s.set_defaults(func=cmd_frontend)

    s = sub.add_parser("report", help="merge and rank report CSVs")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def _category(exc):
    if isinstance(exc, SpoofSynthError):
        return exc.category
    if isinstance(exc, (ValueError, OSError, UnicodeError)):
        return "DataError"
    return "RuntimeFailure"


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except KeyboardInterrupt:
        print("ERROR RuntimeFailure Interrupted: interrupted", file=sys.stderr)
        return EXIT_CODES["RuntimeFailure"]
    except Exception as exc:
        category = _category(exc)
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"ERROR {category} {type(exc).__name__}: {message}", file=sys.stderr)
        logger.debug("traceback", exc_info=True)
        return EXIT_CODES[category]
    return 0


if __name__ == "__main__":
    sys.exit(main())
