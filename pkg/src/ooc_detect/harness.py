"""Evaluate one-shot models on labeled fixtures and write reports."""

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .detections import parse_fixture_entries, record_checksum
from .exceptions import ValidationError
from .io import atomic_write_text
from .oneshot import FAKE, REAL, OneShotOOCClassifier

__all__ = [
    "EvalReport",
    "LabeledSet",
    "compare",
    "emit_report",
    "evaluate",
    "load_labeled_set",
    "read_report",
    "replay",
    "write_comparison",
]

REPORT_FORMAT = "ooc-report v1"
METRICS = ("accuracy", "tpr", "fpr", "precision", "tp", "fp", "tn", "fn", "total")


@dataclass(frozen=True)
class LabeledSet:
    """Records paired with ground truth; ``source`` names the file if any."""

    entries: tuple
    source: str = "<inline>"

    def __post_init__(self):
        entries = tuple((rec, truth) for rec, truth in self.entries)
        seen = set()
        for rec, truth in entries:
            if truth not in (FAKE, REAL):
                raise ValidationError(f"{rec.image_id}: ground truth must be 'fake' or 'real', got {truth!r}")
            if rec.image_id in seen:
                raise ValidationError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    @property
    def records(self):
        return [rec for rec, _ in self.entries]

    @property
    def truths(self):
        return [truth for _, truth in self.entries]

    def checksum(self):
        """Order-independent digest of records and ground truth."""
        truth = dict((rec.image_id, t) for rec, t in self.entries)
        digest = record_checksum(self.records)
        tail = json.dumps(sorted(truth.items()))
        return hashlib.sha256((digest + tail).encode("utf-8")).hexdigest()


def load_labeled_set(path):
    path = Path(path)
    pairs = []
    for idx, (rec, entry) in enumerate(parse_fixture_entries(path.read_bytes(), source=str(path))):
        truth = entry.get("ground_truth")
        if truth not in (FAKE, REAL):
            raise ValidationError(f"{path} entry {idx}: 'ground_truth' must be 'fake' or 'real'")
        pairs.append((rec, truth))
    return LabeledSet(tuple(pairs), source=str(path))


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    tpr: float
    fpr: float
    precision: float
    metadata: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_counts(cls, tp, fp, tn, fn, metadata=None):
        total = tp + fp + tn + fn
        if total == 0:
            raise ValidationError("cannot build a report from zero predictions")
        return cls(
            tp=tp, fp=fp, tn=tn, fn=fn,
            accuracy=(tp + tn) / total,
            tpr=tp / (tp + fn) if tp + fn else 0.0,
            fpr=fp / (fp + tn) if fp + tn else 0.0,
            precision=tp / (tp + fp) if tp + fp else 0.0,
            metadata=dict(metadata or {}),
        )

    def to_dict(self):
        doc = asdict(self)
        doc["format"] = REPORT_FORMAT
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for name in METRICS:
            writer.writerow([name, getattr(self, name)])
        return buf.getvalue()


def evaluate(model, labeled, remove_common=None):
    """Score ``model`` against ground truth; fake is the positive class.

    The report metadata is enough to rebuild the model and re-run (see
    :func:`replay`).
    """
    if not len(labeled):
        raise ValidationError("labeled set is empty")
    verdicts = model.classify_batch(labeled.records)
    tp = fp = tn = fn = 0
    for verdict, truth in zip(verdicts, labeled.truths):
        if verdict.label == FAKE:
            tp, fp = (tp + 1, fp) if truth == FAKE else (tp, fp + 1)
        else:
            tn, fn = (tn + 1, fn) if truth == REAL else (tn, fn + 1)
    meta = {
        "rule": model.rule,
        "tau": float(model.tau),
        "sigma": float(model.sigma),
        "whitelist_file": model.whitelist_.source,
        "remove_common": bool(model.remove_common if remove_common is None else remove_common),
        "fixture": labeled.source,
        "fixture_checksum": labeled.checksum(),
        "reference_label": model.reference_label_,
        # kept as text: the reference percentages must survive exactly
        "model_json": model.to_json(),
    }
    return EvalReport.from_counts(tp, fp, tn, fn, meta)


def replay(report, labeled):
    """Rebuild the model from ``report.metadata`` and evaluate again."""
    meta = report.metadata
    if meta.get("fixture_checksum") != labeled.checksum():
        raise ValidationError("labeled set does not match the report's fixture checksum")
    model = OneShotOOCClassifier.from_json(meta["model_json"])
    return evaluate(model, labeled, remove_common=meta.get("remove_common"))


def emit_report(report, path, fmt="csv"):
    """Write ``report`` atomically as ``csv`` or ``json`` (structured text)."""
    if fmt == "csv":
        text = report.to_csv()
    elif fmt in ("json", "structured-text"):
        text = report.to_json()
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    atomic_write_text(path, text)
    return Path(path)


def read_report(text):
    doc = json.loads(text)
    if doc.pop("format", None) != REPORT_FORMAT:
        raise ValidationError("not an ooc-report v1 document")
    return EvalReport(**doc)


def compare(reports, external=None):
    """Comparison rows ``(name, accuracy, source)`` sorted by accuracy.

    ``reports`` maps (or lists pairs of) names to :class:`EvalReport`;
    ``external`` maps baseline names to accuracies measured elsewhere.
    Ties keep alphabetical order.
    """
    pairs = list(reports.items()) if isinstance(reports, dict) else list(reports)
    ext = list((external or {}).items())
    if not pairs and not ext:
        raise ValidationError("compare needs at least one report")
    rows, seen = [], set()
    for name, rep in pairs:
        rows.append((name, float(rep.accuracy), "measured"))
        if name in seen:
            raise ValidationError(f"duplicate name {name!r}")
        seen.add(name)
    for name, acc in ext:
        if name in seen:
            raise ValidationError(f"duplicate name {name!r}")
        seen.add(name)
        acc = float(acc)
        if not 0.0 <= acc <= 1.0:
            raise ValidationError(f"external accuracy for {name!r} must lie in [0, 1]")
        rows.append((name, acc, "external"))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


def write_comparison(rows, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "accuracy", "source"])
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())
    return Path(path)
