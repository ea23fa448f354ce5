"""
Counting metrics and the dataset evaluation harness
MAE / off-by-one accuracy over manifests, with JSON and CSV reports,
plus a per-channel study with a best-channel oracle
"""
import csv
import io as _io
import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .core import CHANNEL_NAMES, CycleAnnotation, FlowField, ManifestError
from .flow import estimate_flow_sequence
from .io import Manifest, ManifestEntry, load_flows, load_frames, read_signal
from .pipeline import PipelineConfig, count_signal, count_video
from .wavelet import periodogram_count

logger = logging.getLogger(__name__)

CSV_HEADER = ["id", "true", "pred", "rel_err", "off_by_one"]
METHODS = ("wavelet", "fourier")
# |pred - true| <= 1 is inclusive; absorbs rounding in e.g. (9.6 + 1) - 9.6
OBOA_SLACK = 1e-9


def _check_pairs(preds: Sequence[float], gts: Sequence[float]):
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth counts")
    if len(preds) == 0:
        raise ValueError("at least one prediction is required")


def mae(preds: Sequence[float], gts: Sequence[float]) -> Tuple[float, float]:
    """Mean and population std of the relative absolute count error |pred - true| / true"""
    _check_pairs(preds, gts)
    if any(g <= 0 for g in gts):
        raise ValueError("ground-truth count must be positive")
    errors = [abs(p - g) / g for p, g in zip(preds, gts)]
    n = len(errors)
    mean = sum(errors) / n
    std = math.sqrt(sum((e - mean) ** 2 for e in errors) / n)
    return mean, std


def oboa(preds: Sequence[float], gts: Sequence[float]) -> float:
    """Fraction of videos counted within one repetition"""
    _check_pairs(preds, gts)
    hits = sum(1 for p, g in zip(preds, gts) if abs(p - g) <= 1.0 + OBOA_SLACK)
    return hits / len(preds)


def cycle_length_variation(a: CycleAnnotation) -> float:
    """(max - min) / mean of the annotated cycle lengths"""
    bounds = a.cycle_bounds
    if len(bounds) < 2:
        raise ValueError("cycle length variation needs at least 2 cycle bounds")
    lengths = [b1 - b0 for b0, b1 in zip(bounds, bounds[1:])]
    return (max(lengths) - min(lengths)) / (sum(lengths) / len(lengths))


def format_percent(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{100.0 * x:.1f}"


@dataclass(frozen=True)
class EvalRow:
    id: str
    true_count: float
    predicted_count: Optional[float] = None
    abs_rel_error: Optional[float] = None
    off_by_one: Optional[bool] = None
    error: Optional[str] = None

    @property
    def scored(self) -> bool:
        return self.error is None

    @classmethod
    def scored_row(cls, video_id: str, true_count: float, predicted: float) -> "EvalRow":
        rel = abs(predicted - true_count) / true_count if true_count > 0 else None
        return cls(
            id=video_id,
            true_count=true_count,
            predicted_count=predicted,
            abs_rel_error=rel,
            off_by_one=abs(predicted - true_count) <= 1.0 + OBOA_SLACK,
        )


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else format(x, ".10g")


@dataclass(frozen=True)
class EvalReport:
    rows: Tuple[EvalRow, ...]
    aggregate: Dict

    @classmethod
    def from_rows(cls, rows: Sequence[EvalRow]) -> "EvalReport":
        """
        Aggregate over scored rows. MAE uses rows with a positive true count;
        aggregates are None when nothing was scored.
        """
        scored = [r for r in rows if r.scored]
        with_rel = [r for r in scored if r.abs_rel_error is not None]
        mae_mean = mae_std = score = None
        if with_rel:
            mae_mean, mae_std = mae([r.predicted_count for r in with_rel], [r.true_count for r in with_rel])
        if scored:
            score = oboa([r.predicted_count for r in scored], [r.true_count for r in scored])
        aggregate = {
            "mae_mean": mae_mean,
            "mae_std": mae_std,
            "oboa": score,
            "scored": len(scored),
            "failed": len(rows) - len(scored),
        }
        return cls(rows=tuple(rows), aggregate=aggregate)

    # JSON

    def to_json(self) -> str:
        return json.dumps({"videos": [asdict(r) for r in self.rows], "aggregate": self.aggregate}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        rows = tuple(EvalRow(**item) for item in doc["videos"])
        return cls(rows=rows, aggregate=doc["aggregate"])

    # CSV

    def to_csv(self) -> str:
        buffer = _io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            flag = "" if r.off_by_one is None else str(int(r.off_by_one))
            writer.writerow([r.id, _fmt(r.true_count), _fmt(r.predicted_count), _fmt(r.abs_rel_error), flag])
        for r in self.rows:
            if r.error is not None:
                message = " ".join(r.error.split())
                buffer.write(f"# error {r.id}: {message}\n")
        agg = self.aggregate
        buffer.write(
            f"# aggregate mae_mean={_fmt(agg['mae_mean'])},mae_std={_fmt(agg['mae_std'])},"
            f"oboa={_fmt(agg['oboa'])},scored={agg['scored']},failed={agg['failed']}\n"
        )
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        data_lines = [line for line in text.splitlines() if line and not line.startswith("#")]
        comments = [line[1:].strip() for line in text.splitlines() if line.startswith("#")]
        errors: Dict[str, str] = {}
        aggregate: Dict = {}
        for comment in comments:
            if comment.startswith("error "):
                key, _, message = comment[len("error "):].partition(": ")
                errors[key] = message
            elif comment.startswith("aggregate "):
                for pair in comment[len("aggregate "):].split(","):
                    name, _, value = pair.partition("=")
                    if name in ("scored", "failed"):
                        aggregate[name] = int(value)
                    else:
                        aggregate[name] = float(value) if value else None

        reader = csv.reader(data_lines)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")

        def num(value: str) -> Optional[float]:
            return float(value) if value else None

        rows = []
        for video_id, true, pred, rel, flag in reader:
            rows.append(EvalRow(
                id=video_id,
                true_count=float(true),
                predicted_count=num(pred),
                abs_rel_error=num(rel),
                off_by_one=None if flag == "" else flag == "1",
                error=errors.get(video_id),
            ))
        return cls(rows=tuple(rows), aggregate=aggregate)


def _predict(manifest: Manifest, entry: ManifestEntry, cfg: PipelineConfig, method: str) -> float:
    path = manifest.resolve(entry)
    entry_cfg = replace(cfg, wavelet=replace(cfg.wavelet, fps=entry.fps))
    if entry.source_kind == "signal":
        signal = read_signal(path.read_text(encoding="utf-8"))
        if method == "fourier":
            return periodogram_count(signal, entry.fps)
        return count_signal(signal, entry_cfg).count
    if method == "fourier":
        raise ValueError("the Fourier baseline only handles signal entries")
    if entry.source_kind == "frames":
        return count_video(frames=load_frames(path), cfg=entry_cfg).count
    return count_video(flows=load_flows(path), cfg=entry_cfg).count


def run_dataset(m: Manifest, cfg: PipelineConfig = PipelineConfig(), method: str = "wavelet") -> EvalReport:
    """
    Count every manifest entry and score it against its annotation

    Args:
        m: Manifest; relative paths resolve against its directory
        cfg: Pipeline configuration (fps is taken from each entry)
        method: "wavelet" (pipeline) or "fourier" (periodogram baseline, signal entries only)

    Returns:
        EvalReport with rows in manifest order; failed entries become error rows
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if not m.videos:
        raise ManifestError("empty manifest")

    rows: List[EvalRow] = []
    for entry in m.videos:
        true_count = float(entry.annotation.count)
        try:
            predicted = _predict(m, entry, cfg, method)
            rows.append(EvalRow.scored_row(entry.id, true_count, float(predicted)))
            logger.info(f"[OK] {entry.id}: predicted {predicted:.2f}, true {true_count:g}")
        except Exception as e:
            logger.error(f"[ERROR] {entry.id}: {e}")
            rows.append(EvalRow(id=entry.id, true_count=true_count, error=str(e)))

    report = EvalReport.from_rows(rows)
    agg = report.aggregate
    logger.info(
        f"[INFO] MAE {format_percent(agg['mae_mean'])} +/- {format_percent(agg['mae_std'])}, "
        f"OBOA {agg['oboa'] if agg['oboa'] is not None else 'n/a'} "
        f"({agg['scored']} scored, {agg['failed']} failed)"
    )
    return report


# ----------------------------
# Per-channel study
# ----------------------------

STUDY_SETTINGS = CHANNEL_NAMES + ("combined", "oracle")
STUDY_CSV_HEADER = ["setting", "mae_mean", "mae_std", "oboa", "scored", "failed"]


def _entry_flows(manifest: Manifest, entry: ManifestEntry, cfg: PipelineConfig) -> List[FlowField]:
    path = manifest.resolve(entry)
    if entry.source_kind == "frames":
        return estimate_flow_sequence(load_frames(path), cfg.hs)
    if entry.source_kind == "flow":
        return load_flows(path)
    raise ValueError("the channel study needs frames or flow, not a 1-D signal")


def _oracle_row(video_id: str, true_count: float, candidates: Sequence[EvalRow]) -> EvalRow:
    """Best single channel for this video; ties keep the earlier channel"""
    scored = [r for r in candidates if r.scored]
    if not scored:
        return EvalRow(id=video_id, true_count=true_count, error="no channel produced a count")
    best = min(scored, key=lambda r: abs(r.predicted_count - true_count))
    return EvalRow.scored_row(video_id, true_count, best.predicted_count)


@dataclass(frozen=True)
class ChannelStudy:
    """One EvalReport per single motion map, for all maps combined, and for the per-video oracle"""
    reports: Dict[str, EvalReport]

    def summary(self) -> List[Dict]:
        rows = []
        for setting in STUDY_SETTINGS:
            agg = self.reports[setting].aggregate
            rows.append({"setting": setting, **{k: agg[k] for k in STUDY_CSV_HEADER[1:]}})
        return rows

    def to_json(self) -> str:
        doc = {
            "summary": self.summary(),
            "settings": {s: json.loads(self.reports[s].to_json()) for s in STUDY_SETTINGS},
        }
        return json.dumps(doc, indent=2)

    def to_csv(self) -> str:
        buffer = _io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(STUDY_CSV_HEADER)
        for row in self.summary():
            writer.writerow([row["setting"], _fmt(row["mae_mean"]), _fmt(row["mae_std"]), _fmt(row["oboa"]),
                             row["scored"], row["failed"]])
        return buffer.getvalue()


def run_channel_study(m: Manifest, cfg: PipelineConfig = PipelineConfig()) -> ChannelStudy:
    """
    Count every video with each motion map on its own, with all maps fused, and
    with an oracle that picks the best single map per video

    Flow is estimated (or loaded) once per video and shared by all settings.
    """
    if not m.videos:
        raise ManifestError("empty manifest")

    rows: Dict[str, List[EvalRow]] = {s: [] for s in STUDY_SETTINGS}
    for entry in m.videos:
        true_count = float(entry.annotation.count)
        entry_cfg = replace(cfg, wavelet=replace(cfg.wavelet, fps=entry.fps))
        try:
            flows = _entry_flows(m, entry, entry_cfg)
        except Exception as e:
            logger.error(f"[ERROR] {entry.id}: {e}")
            for setting in STUDY_SETTINGS:
                rows[setting].append(EvalRow(id=entry.id, true_count=true_count, error=str(e)))
            continue

        for setting in CHANNEL_NAMES + ("combined",):
            channels = CHANNEL_NAMES if setting == "combined" else (setting,)
            try:
                predicted = count_video(flows=flows, cfg=replace(entry_cfg, channels=channels)).count
                rows[setting].append(EvalRow.scored_row(entry.id, true_count, float(predicted)))
            except Exception as e:
                logger.error(f"[ERROR] {entry.id} ({setting}): {e}")
                rows[setting].append(EvalRow(id=entry.id, true_count=true_count, error=str(e)))
        singles = [rows[name][-1] for name in CHANNEL_NAMES]
        rows["oracle"].append(_oracle_row(entry.id, true_count, singles))
        logger.info(f"[OK] {entry.id}: oracle {rows['oracle'][-1].predicted_count}, true {true_count:g}")

    study = ChannelStudy(reports={s: EvalReport.from_rows(rows[s]) for s in STUDY_SETTINGS})
    for row in study.summary():
        logger.info(f"[INFO] {row['setting']}: MAE {format_percent(row['mae_mean'])}, OBOA {row['oboa']}")
    return study
