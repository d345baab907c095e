"""One-shot fake detection from a single reference record.

The whole trained state is the reference's out-of-context (OOC) labels plus
a decision rule:

``shared-ooc``
    fake when the query shows an OOC label the reference also had, with
    confidence >= ``tau``.
``any-ooc``
    fake when the query shows any OOC label with confidence >= ``tau``.
``cosine-ooc``
    fake when the cosine similarity between the query's and the
    reference's OOC confidence vectors is >= ``sigma``.

Scores equal to the threshold count as fake.
"""

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .detections import DetectionRecord, entry_json, record_from_entry
from .exceptions import CompatibilityError, FitError, ParseError, ValidationError
from .features import (
    ContextWhitelist,
    Vocabulary,
    build_vocabulary,
    default_whitelist,
    ooc_split,
    vectorize,
)
from .validation import check_probability, check_records

__all__ = [
    "FAKE",
    "MODEL_FORMAT",
    "REAL",
    "RULES",
    "OneShotOOCClassifier",
    "Verdict",
    "classify",
    "classify_batch",
    "cosine",
    "fit",
    "load_model",
]

FAKE, REAL = "fake", "real"
RULES = ("shared-ooc", "any-ooc", "cosine-ooc")
MODEL_FORMAT = "ooc-model v1"


@dataclass(frozen=True)
class Verdict:
    image_id: str
    label: str
    score: float
    evidence: tuple = ()

    @property
    def is_fake(self):
        return self.label == FAKE


def cosine(a, b):
    """Cosine similarity of two sparse vectors over the same vocabulary.

    Zero when either vector is all zeros.
    """
    if a.vocab_id != b.vocab_id or a.dim != b.dim:
        raise CompatibilityError(f"vectors use different vocabularies ({a.vocab_id} vs {b.vocab_id})")
    if not a.entries or not b.entries:
        return 0.0
    # rescale by the max entry so subnormal confidences cannot underflow
    sa, sb = max(a.entries.values()), max(b.entries.values())
    xa = {i: v / sa for i, v in a.entries.items()}
    xb = {i: v / sb for i, v in b.entries.items()}
    small, large = (xa, xb) if len(xa) <= len(xb) else (xb, xa)
    dot = math.fsum(v * large[i] for i, v in small.items() if i in large)
    if dot == 0.0:
        return 0.0
    na = math.sqrt(math.fsum(v * v for v in xa.values()))
    nb = math.sqrt(math.fsum(v * v for v in xb.values()))
    return min(1.0, dot / (na * nb))


def _by_confidence(pairs):
    return tuple(sorted(pairs, key=lambda p: (-p[1], p[0])))


class OneShotOOCClassifier(BaseEstimator, ClassifierMixin):
    """Fake/real classifier fitted on exactly one reference record.

    Parameters
    ----------
    rule : {'shared-ooc', 'any-ooc', 'cosine-ooc'}, default='shared-ooc'
    tau : float, default=0.5
        Confidence threshold for the label rules.
    sigma : float, default=0.3
        Similarity threshold for ``cosine-ooc``.
    whitelist : ContextWhitelist or None
        Labels natural to the domain; ``None`` uses the bundled face list.
    remove_common : bool, default=False
        Passed to the vocabulary builder for ``cosine-ooc``. With one
        reference it only triggers the single-record warning; the flag is
        kept so runs record it.
    n_jobs : int or None
        Threads used by :meth:`classify_batch`; output order never changes.

    Attributes
    ----------
    reference_ : DetectionRecord
    reference_label_ : str
    reference_ooc_ : DetectionRecord
    vocab_ : Vocabulary or None
    classes_ : ndarray of shape (2,)
    """

    def __init__(self, rule="shared-ooc", tau=0.5, sigma=0.3, whitelist=None,
                 remove_common=False, n_jobs=None):
        self.rule = rule
        self.tau = tau
        self.sigma = sigma
        self.whitelist = whitelist
        self.remove_common = remove_common
        self.n_jobs = n_jobs

    def _check_params(self):
        if self.rule not in RULES:
            raise ValidationError(f"rule must be one of {RULES}, got {self.rule!r}")
        check_probability(self.tau, "tau")
        check_probability(self.sigma, "sigma")
        if self.whitelist is not None and not isinstance(self.whitelist, ContextWhitelist):
            raise ValidationError("whitelist must be a ContextWhitelist or None")

    def fit(self, X, y=None):
        """Fit on a one-element sequence of records.

        ``y`` defaults to ``['fake']``; a real reference is only meaningful
        for ``any-ooc``, which ignores the reference anyway.
        """
        self._check_params()
        records = check_records(X)
        if len(records) != 1:
            raise FitError(f"one-shot fit takes exactly one reference record, got {len(records)}")
        reference = records[0]
        ref_label = FAKE
        if y is not None:
            y = np.asarray(y, dtype=object).ravel()
            ref_label = str(y[0]) if len(y) == 1 else None
        if ref_label not in (FAKE, REAL):
            raise FitError(f"reference label must be a single 'fake' or 'real', got {y!r}")
        if not reference.labels:
            raise FitError("reference record has no labels")
        whitelist = self.whitelist if self.whitelist is not None else default_whitelist()
        _, ref_ooc = ooc_split(reference, whitelist)
        if self.rule != "any-ooc":
            if ref_label == REAL:
                raise FitError(f"{self.rule} needs a fake reference; use any-ooc for a real one")
            if not ref_ooc.labels:
                raise FitError(
                    f"reference {reference.image_id!r} has no out-of-context labels, so "
                    f"{self.rule} cannot discriminate (any-ooc remains available)"
                )
        self.reference_ = reference
        self.reference_label_ = ref_label
        self.whitelist_ = whitelist
        self.reference_ooc_ = ref_ooc
        self.vocab_ = None
        self.reference_vector_ = None
        if self.rule == "cosine-ooc":
            self.vocab_ = build_vocabulary([ref_ooc], remove_common=self.remove_common)
            self.reference_vector_ = vectorize(ref_ooc, self.vocab_)
        self.classes_ = np.array([FAKE, REAL])
        return self

    def classify(self, query):
        check_is_fitted(self, "reference_")
        if not isinstance(query, DetectionRecord):
            query = check_records([query])[0]
        _, q_ooc = ooc_split(query, self.whitelist_)
        if self.rule == "cosine-ooc":
            qvec = vectorize(q_ooc, self.vocab_)
            score = cosine(qvec, self.reference_vector_)
            fake = score >= self.sigma
            shared = self.reference_vector_.entries
            evidence = _by_confidence(
                (self.vocab_.labels[i], v) for i, v in qvec.entries.items() if i in shared
            ) if fake else ()
            return Verdict(query.image_id, FAKE if fake else REAL, score, evidence)
        if self.rule == "shared-ooc":
            ref = self.reference_ooc_.labels
            hits = [(lab, c) for lab, c in q_ooc.labels.items() if lab in ref and c >= self.tau]
        else:
            hits = [(lab, c) for lab, c in q_ooc.labels.items() if c >= self.tau]
        evidence = _by_confidence(hits)
        if evidence:
            return Verdict(query.image_id, FAKE, evidence[0][1], evidence)
        return Verdict(query.image_id, REAL, 0.0, ())

    def classify_batch(self, X):
        records = check_records(X)
        if not self.n_jobs or self.n_jobs == 1 or len(records) < 2:
            return [self.classify(r) for r in records]
        workers = None if self.n_jobs < 0 else self.n_jobs
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.classify, records))

    def predict(self, X):
        return np.array([v.label for v in self.classify_batch(X)], dtype=object)

    def decision_function(self, X):
        return np.array([v.score for v in self.classify_batch(X)])

    # -- persistence ---------------------------------------------------------

    def to_json(self):
        check_is_fitted(self, "reference_")
        doc = {
            "format": MODEL_FORMAT,
            "rule": self.rule,
            "tau": float(self.tau),
            "sigma": float(self.sigma),
            "remove_common": bool(self.remove_common),
            "whitelist": sorted(self.whitelist_.labels),
            "whitelist_source": self.whitelist_.source,
            "reference_label": self.reference_label_,
            "reference": "@REFERENCE@",
        }
        if self.vocab_ is not None:
            doc["vocab"] = list(self.vocab_.labels)
        text = json.dumps(doc, indent=1)
        return text.replace('"@REFERENCE@"', entry_json(self.reference_)) + "\n"

    def save(self, path):
        from .io import atomic_write_text

        atomic_write_text(path, self.to_json())

    @classmethod
    def from_json(cls, text, source=None):
        try:
            doc = json.loads(text, parse_float=Decimal)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno, column=exc.colno, pos=exc.pos,
                             source=source) from None
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ValidationError("model file must hold an object")
        if doc.get("format") != MODEL_FORMAT:
            raise CompatibilityError(f"unsupported model format {doc.get('format')!r}")
        try:
            whitelist = ContextWhitelist(frozenset(doc["whitelist"]),
                                         doc.get("whitelist_source", "<model>"))
            model = cls(rule=doc["rule"], tau=float(doc["tau"]), sigma=float(doc["sigma"]),
                        whitelist=whitelist, remove_common=bool(doc.get("remove_common", False)))
            reference = record_from_entry(doc["reference"], "model reference")
            label = doc.get("reference_label", FAKE)
        except KeyError as exc:
            raise ValidationError(f"model file is missing {exc.args[0]!r}") from None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            model.fit([reference], [label])
        if "vocab" in doc and model.vocab_ is not None and Vocabulary(tuple(doc["vocab"])) != model.vocab_:
            raise CompatibilityError("stored vocabulary does not match the reference record")
        return model


def load_model(path):
    path = Path(path)
    return OneShotOOCClassifier.from_json(path.read_text(encoding="utf-8"), source=str(path))


def fit(reference, whitelist=None, rule="shared-ooc", tau=0.5, sigma=0.3, remove_common=False,
        reference_label=FAKE):
    """Functional form of ``OneShotOOCClassifier(...).fit([reference])``."""
    model = OneShotOOCClassifier(rule=rule, tau=tau, sigma=sigma, whitelist=whitelist,
                                 remove_common=remove_common)
    return model.fit([reference], [reference_label])


def classify(model, query):
    return model.classify(query)


def classify_batch(model, queries):
    return model.classify_batch(queries)
