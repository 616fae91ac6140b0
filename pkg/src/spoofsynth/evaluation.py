"""Detector-agnostic spoofing evaluation.

Score polarity is fixed: higher scores mean "more likely genuine".
"""
import csv
import logging
import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio.clip import peak_dbfs, read_wav, write_wav
from .exceptions import BadFormat, DetectorFailure, DuplicateLabel, EmptyScoreSet, RuntimeFailure
from .synthesis import silence_ratio

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.10
REPORT_FIELDS = ("label", "ns", "nsd", "ssl", "eer_percent")


@dataclass(frozen=True)
class DetectionScore:
    utterance_id: str
    score: float
    detector_id: str

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise DetectorFailure(self.utterance_id, f"non-finite score {self.score}")


@dataclass(frozen=True)
class EERResult:
    eer: float
    threshold: float
    num_genuine: int
    num_spoof: int


def compute_eer(genuine, spoof):
    """Equal error rate with linear interpolation at the FAR/FRR crossing.

    A trial is accepted as genuine when ``score >= t``.  Operating points
    are every distinct score plus one threshold just above the maximum
    (where everything is rejected).
    """
    genuine = np.asarray(genuine, dtype=np.float64).ravel()
    spoof = np.asarray(spoof, dtype=np.float64).ravel()
    if genuine.size == 0 or spoof.size == 0:
        raise EmptyScoreSet(f"need genuine and spoof scores, got {genuine.size} and {spoof.size}")
    thresholds = np.unique(np.concatenate([genuine, spoof]))
    thresholds = np.append(thresholds, np.nextafter(thresholds[-1], np.inf))
    g_sorted, s_sorted = np.sort(genuine), np.sort(spoof)
    frr = np.searchsorted(g_sorted, thresholds, side="left") / genuine.size
    far = 1.0 - np.searchsorted(s_sorted, thresholds, side="left") / spoof.size
    diff = frr - far  # non-decreasing, from -1 to +1
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0 or k == 0:
        return EERResult(float(far[k]), float(thresholds[k]), genuine.size, spoof.size)
    d0, d1 = diff[k - 1], diff[k]
    alpha = -d0 / (d1 - d0)
    eer = far[k - 1] + alpha * (far[k] - far[k - 1])
    threshold = thresholds[k - 1] + alpha * (thresholds[k] - thresholds[k - 1])
    return EERResult(float(eer), float(threshold), genuine.size, spoof.size)


# --- detectors -------------------------------------------------------------------

class StubDetector:
    """Deterministic stand-in detector.

    ``score = silence_weight * silence_ratio
              + level_weight * (1 - |peak_dbfs - ref_dbfs| / 60)``
    """

    detector_id = "stub"

    def __init__(self, silence_weight=1.0, level_weight=1.0, ref_dbfs=-3.0):
        self.silence_weight = silence_weight
        self.level_weight = level_weight
        self.ref_dbfs = ref_dbfs

    def score_clip(self, clip):
        level = 1.0 - abs(peak_dbfs(clip) - self.ref_dbfs) / 60.0
        return self.silence_weight * silence_ratio(clip) + self.level_weight * level

    def score_files(self, paths):
        scores, failures = {}, {}
        for path in paths:
            utt = Path(path).stem
            try:
                scores[utt] = self.score_clip(read_wav(path))
            except Exception as exc:  # per-file failures are collected, not fatal
                failures[utt] = str(exc)
        return scores, failures


def stub_detector(clip, **weights):
    return StubDetector(**weights).score_clip(clip)


class CommandDetector:
    """External detector speaking the file-list protocol.

    The command is run as ``CMD --list LIST.txt --out SCORES.tsv``.  LIST
    holds one WAV path per line; SCORES holds ``utt_id<TAB>score`` lines,
    optionally preceded by ``# polarity: lower-genuine`` when the detector
    emits spoof-likelihoods, in which case scores are negated.
    """

    def __init__(self, command, timeout=None):
        self.command = command
        self.detector_id = command
        self.timeout = timeout

    def score_files(self, paths):
        with tempfile.TemporaryDirectory() as tmp:
            list_file = Path(tmp) / "list.txt"
            out_file = Path(tmp) / "scores.tsv"
            list_file.write_text("".join(f"{p}\n" for p in paths), encoding="utf-8")
            argv = shlex.split(self.command) + ["--list", str(list_file), "--out", str(out_file)]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout)
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise RuntimeFailure(f"detector command failed to run: {exc}") from exc
            if proc.returncode != 0:
                raise RuntimeFailure(f"detector exited with {proc.returncode}: {proc.stderr.strip()[:200]}")
            if not out_file.is_file():
                raise RuntimeFailure("detector wrote no score file")
            parsed = parse_scores(out_file.read_text(encoding="utf-8"))
        expected = {Path(p).stem for p in paths}
        scores = {u: s for u, s in parsed.items() if u in expected}
        failures = {u: "no score returned" for u in expected - set(scores)}
        return scores, failures


def parse_scores(text):
    scores = {}
    sign = 1.0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "polarity":
                if value.strip() not in ("higher-genuine", "lower-genuine"):
                    raise BadFormat(f"unknown polarity {value.strip()!r}")
                sign = -1.0 if value.strip() == "lower-genuine" else 1.0
            continue
        try:
            utt, value = line.split("\t")
            scores[utt] = float(value)
        except ValueError as exc:
            raise BadFormat(f"scores line {lineno}: expected 'utt_id<TAB>float'") from exc
    return {u: sign * s for u, s in scores.items()}


def make_detector(spec):
    return StubDetector() if spec in (None, "stub") else CommandDetector(spec)


def score_directory(detector, directory):
    """Score every ``*.wav`` in ``directory``.

    Per-file failures are logged and skipped; more than 10% failures abort.
    """
    paths = sorted(Path(directory).glob("*.wav"))
    if not paths:
        return []
    scores, failures = detector.score_files([str(p) for p in paths])
    results = []
    for utt in sorted(scores):
        try:
            results.append(DetectionScore(utt, float(scores[utt]), detector.detector_id))
        except DetectorFailure as exc:
            failures[utt] = str(exc)
    for utt, reason in sorted(failures.items()):
        logger.warning("%s", DetectorFailure(utt, reason))
    if len(failures) > MAX_FAILURE_FRACTION * len(paths):
        raise RuntimeFailure(f"detector failed on {len(failures)} of {len(paths)} files")
    return results


# --- sweeps and reports --------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    label: str
    ns: float
    nsd: float
    ckpt: str = ""
    ssl: bool = True


@dataclass(frozen=True)
class SweepConfig:
    rows: tuple
    texts: tuple = ()
    speakers: tuple = ()
    seed: int = 0

    def __post_init__(self):
        labels = [r.label for r in self.rows]
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        if dupes:
            raise DuplicateLabel(f"duplicate sweep labels: {dupes}")

    @classmethod
    def from_dict(cls, d):
        rows = tuple(SweepRow(**r) for r in d["rows"])
        return cls(rows, tuple(d.get("texts", ())), tuple(d.get("speakers", ())), d.get("seed", 0))


@dataclass(frozen=True)
class ReportRow:
    label: str
    ns: float
    nsd: float
    ssl: bool
    eer: float
    failed: bool = False
    error: str = ""

    @property
    def eer_percent(self):
        return 100.0 * self.eer


@dataclass(frozen=True)
class EvalReport:
    """Rows sorted by EER descending (ties by label); failed rows last."""

    rows: tuple = field(default=())

    def __post_init__(self):
        labels = [r.label for r in self.rows]
        if len(set(labels)) != len(labels):
            raise DuplicateLabel("report labels must be unique")
        ordered = sorted(self.rows, key=lambda r: (r.failed, -r.eer if not r.failed else 0.0, r.label))
        object.__setattr__(self, "rows", tuple(ordered))

    def best(self):
        ok = [r for r in self.rows if not r.failed]
        if not ok:
            raise EmptyScoreSet("report has no successful rows")
        return ok[0]

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_FIELDS)
            for r in self.rows:
                eer = "" if r.failed else f"{r.eer_percent:.3f}"
                w.writerow([r.label, f"{r.ns:g}", f"{r.nsd:g}", int(r.ssl), eer])

    @classmethod
    def read_csv(cls, path):
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != REPORT_FIELDS:
                raise BadFormat(f"{path}: header must be {','.join(REPORT_FIELDS)}")
            for rec in reader:
                failed = rec["eer_percent"] == ""
                try:
                    rows.append(ReportRow(rec["label"], float(rec["ns"]), float(rec["nsd"]),
                                          rec["ssl"] in ("1", "true", "True"),
                                          float("nan") if failed else float(rec["eer_percent"]) / 100.0,
                                          failed))
                except (TypeError, ValueError) as exc:
                    raise BadFormat(f"{path}:{reader.line_num}: {exc}") from exc
        return cls(tuple(rows))

    def format_table(self):
        lines = [f"{'label':<40} {'EER%':>8}"]
        for r in self.rows:
            lines.append(f"{r.label:<40} {'FAILED' if r.failed else f'{r.eer_percent:8.3f}':>8}")
        return "\n".join(lines)


def run_sweep(sweep, real_dir, detector, out_dir, load_voice):
    """Synthesize, score and compute EER for every sweep row.

    ``load_voice(ckpt_path)`` returns an object with
    ``synthesize(text, ns, nsd, speaker, seed, index)`` returning an
    AudioClip or a SynthesisResult.
    A failing row is flagged in the report instead of aborting the sweep.
    """
    out_dir = Path(out_dir)
    real = score_directory(detector, real_dir)
    if not real:
        raise EmptyScoreSet(f"no genuine audio scored in {real_dir}")
    genuine = [s.score for s in real]
    rows = []
    for row in sweep.rows:
        try:
            voice = load_voice(row.ckpt)
            row_dir = out_dir / _safe_name(row.label)
            row_dir.mkdir(parents=True, exist_ok=True)
            index = 0
            for spk in sweep.speakers:
                for text in sweep.texts:
                    out = voice.synthesize(text, row.ns, row.nsd, spk, sweep.seed, index)
                    clip = getattr(out, "clip", out)
                    write_wav(row_dir / f"{_safe_name(str(spk))}_{index:05d}.wav", clip)
                    index += 1
            fake = [s.score for s in score_directory(detector, row_dir)]
            result = compute_eer(genuine, fake)
            rows.append(ReportRow(row.label, row.ns, row.nsd, row.ssl, result.eer))
        except Exception as exc:
            logger.error("sweep row %s failed: %s", row.label, exc)
            rows.append(ReportRow(row.label, row.ns, row.nsd, row.ssl, float("nan"), True, str(exc)))
    return EvalReport(tuple(rows))


def _safe_name(label):
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in label)
