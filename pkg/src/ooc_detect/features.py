"""Bag-of-words feature space over detected objects.

Each image becomes a sparse vector whose entry ``i`` is the detector's
confidence for vocabulary label ``i``. A context whitelist splits labels into
the ones that belong in the image domain and the out-of-context ones.
"""

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import CompatibilityError, ParseError, ValidationError
from .validation import canonical_label, check_probability, check_records

__all__ = [
    "ContextWhitelist",
    "OOCVectorizer",
    "SparseVector",
    "Vocabulary",
    "build_vocabulary",
    "default_whitelist",
    "ooc_split",
    "read_vectors",
    "read_vocabulary",
    "vectorize",
    "write_vectors",
    "write_vocabulary",
]

VOCAB_HEADER = "ooc-vocab v1"


@dataclass(frozen=True)
class Vocabulary:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        for lab in labels:
            if canonical_label(lab) != lab:
                raise ValidationError(f"vocabulary label {lab!r} is not canonical")
        if any(a >= b for a, b in zip(labels, labels[1:])):
            raise ValidationError("vocabulary labels must be strictly ascending")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def w(self):
        return len(self.labels)

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self._index

    def index(self, label):
        return self._index[label]

    @property
    def vocab_id(self):
        """Content hash; two vocabularies with the same labels share an id."""
        return hashlib.sha256("\n".join(self.labels).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class SparseVector:
    """Confidence vector with implicit zeros; ``entries`` maps index -> value."""

    vocab_id: str
    dim: int
    entries: dict = field(default_factory=dict)
    image_id: str = ""

    def __post_init__(self):
        clean = {}
        for idx, value in self.entries.items():
            idx = int(idx)
            if not 0 <= idx < self.dim:
                raise ValidationError(f"index {idx} out of range for dimension {self.dim}")
            value = check_probability(value, f"entry {idx}")
            if value:
                clean[idx] = value
        object.__setattr__(self, "entries", dict(sorted(clean.items())))

    @property
    def nnz(self):
        return len(self.entries)

    def toarray(self):
        dense = np.zeros(self.dim)
        for idx, value in self.entries.items():
            dense[idx] = value
        return dense

    def scaled(self, factor):
        """Copy with every entry multiplied by ``factor``; no range check."""
        out = object.__new__(SparseVector)
        object.__setattr__(out, "vocab_id", self.vocab_id)
        object.__setattr__(out, "dim", self.dim)
        object.__setattr__(out, "entries", {i: v * factor for i, v in self.entries.items() if v * factor})
        object.__setattr__(out, "image_id", self.image_id)
        return out


@dataclass(frozen=True)
class ContextWhitelist:
    """Labels considered natural for the image domain; ``source`` names the file."""

    labels: frozenset
    source: str = "<inline>"

    def __post_init__(self):
        labels = frozenset(self.labels)
        for lab in labels:
            if canonical_label(lab) != lab:
                raise ValidationError(f"whitelist label {lab!r} is not canonical")
        object.__setattr__(self, "labels", labels)

    def __contains__(self, label):
        return label in self.labels

    def __len__(self):
        return len(self.labels)

    @classmethod
    def parse(cls, text, source="<inline>"):
        labels = set()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            labels.add(canonical_label(line))
        return cls(frozenset(labels), source)

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.parse(path.read_text(encoding="utf-8"), source=str(path))

    def dumps(self):
        return "".join(f"{lab}\n" for lab in sorted(self.labels))


def default_whitelist():
    """Whitelist shipped with the package (portrait/face imagery)."""
    text = resources.files("ooc_detect").joinpath("data/face_whitelist.txt").read_text(encoding="utf-8")
    return ContextWhitelist.parse(text, source="builtin:face_whitelist.txt")


def build_vocabulary(records, remove_common=False):
    """Sorted union of all labels seen in ``records``.

    With ``remove_common`` labels found in every record are dropped, which
    needs at least two records; for a single record the removal is skipped
    with a ``UserWarning`` because it would empty the vocabulary.
    """
    records = check_records(records, allow_empty=False, name="records")
    union = set()
    for rec in records:
        union.update(rec.labels)
    if remove_common:
        if len(records) < 2:
            warnings.warn(
                "remove_common needs at least two records; keeping all labels",
                UserWarning,
                stacklevel=2,
            )
        else:
            common = set(records[0].labels)
            for rec in records[1:]:
                common &= set(rec.labels)
            union -= common
    return Vocabulary(tuple(sorted(union)))


def vectorize(record, vocab):
    """Project ``record`` onto ``vocab``; labels outside the vocabulary are dropped."""
    entries = {vocab.index(lab): conf for lab, conf in record.labels.items() if lab in vocab and conf}
    return SparseVector(vocab.vocab_id, vocab.w, entries, record.image_id)


def ooc_split(record, whitelist):
    """Partition ``record`` into (in-context, out-of-context) sub-records."""
    return (
        record.restrict(lambda lab: lab in whitelist),
        record.restrict(lambda lab: lab not in whitelist),
    )


# -- persistence -------------------------------------------------------------


def write_vocabulary(vocab):
    return f"{VOCAB_HEADER} w={vocab.w}\n" + "".join(f"{lab}\n" for lab in vocab.labels)


def read_vocabulary(text, source=None):
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty vocabulary file", line=1, source=source)
    head = lines[0].split()
    if len(head) != 3 or " ".join(head[:2]) != VOCAB_HEADER or not head[2].startswith("w="):
        if head[:1] == ["ooc-vocab"]:
            raise CompatibilityError(f"unsupported vocabulary header {lines[0]!r}")
        raise ParseError(f"bad vocabulary header {lines[0]!r}", line=1, source=source)
    try:
        w = int(head[2][2:])
    except ValueError:
        raise ParseError(f"bad dimension in header {lines[0]!r}", line=1, source=source) from None
    labels = [ln for ln in lines[1:] if ln.strip()]
    if len(labels) != w:
        raise ValidationError(f"header says w={w} but file lists {len(labels)} labels")
    return Vocabulary(tuple(labels))


def write_vectors(vectors):
    doc = [
        {
            "image_id": v.image_id,
            "vocab_id": v.vocab_id,
            "entries": [{"index": i, "value": val} for i, val in v.entries.items()],
        }
        for v in vectors
    ]
    return json.dumps(doc, indent=1) + "\n"


def read_vectors(text, vocab, source=None):
    """Parse a vector file; every vector must belong to ``vocab``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno, pos=exc.pos, source=source) from None
    if not isinstance(doc, list):
        raise ValidationError("vector file must hold an array")
    out = []
    for n, item in enumerate(doc):
        if not isinstance(item, dict) or not {"image_id", "vocab_id", "entries"} <= set(item):
            raise ValidationError(f"vector {n}: needs image_id, vocab_id and entries")
        if item["vocab_id"] != vocab.vocab_id:
            raise CompatibilityError(
                f"vector {n} was built for vocabulary {item['vocab_id']}, not {vocab.vocab_id}"
            )
        try:
            entries = {int(e["index"]): e["value"] for e in item["entries"]}
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"vector {n}: malformed entries") from None
        out.append(SparseVector(vocab.vocab_id, vocab.w, entries, item["image_id"]))
    return out


# -- estimator ---------------------------------------------------------------


class OOCVectorizer(BaseEstimator, TransformerMixin):
    """Learn a label vocabulary from detection records and emit sparse rows.

    Parameters
    ----------
    remove_common : bool, default=False
        Drop labels present in every training record.
    whitelist : ContextWhitelist or None, default=None
        When given, only out-of-context labels enter the vocabulary and the
        output rows.
    """

    def __init__(self, remove_common=False, whitelist=None):
        self.remove_common = remove_common
        self.whitelist = whitelist

    def _prepare(self, X):
        records = check_records(X)
        if self.whitelist is not None:
            records = [ooc_split(r, self.whitelist)[1] for r in records]
        return records

    def fit(self, X, y=None):
        records = self._prepare(X)
        if not records:
            raise ValidationError("cannot fit a vocabulary on zero records")
        self.vocabulary_ = build_vocabulary(records, remove_common=self.remove_common)
        self.n_features_out_ = self.vocabulary_.w
        return self

    def transform_vectors(self, X):
        check_is_fitted(self, "vocabulary_")
        return [vectorize(r, self.vocabulary_) for r in self._prepare(X)]

    def transform(self, X):
        vectors = self.transform_vectors(X)
        rows, cols, vals = [], [], []
        for r, vec in enumerate(vectors):
            for c, v in vec.entries.items():
                rows.append(r)
                cols.append(c)
                vals.append(v)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(vectors), self.vocabulary_.w))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        return np.asarray(self.vocabulary_.labels, dtype=object)
