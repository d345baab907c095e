"""Detection records: fixtures, canonicalization and a vendor-agnostic API client.

A fixture file is a JSON array of ``{"image_id", "labels": [{"name",
"confidence"}]}`` objects with confidences kept as percentages, exactly as a
detection console prints them. Internally every confidence lives in [0, 1].
"""

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

from .exceptions import MappingError, ParseError, RemoteError, ValidationError
from .validation import canonical_label, check_probability, to_decimal

log = logging.getLogger(__name__)

API_KEY_ENV = "OOC_DETECTOR_API_KEY"

__all__ = [
    "API_KEY_ENV",
    "DEFAULT_MAPPING",
    "DetectionCache",
    "DetectionRecord",
    "EndpointConfig",
    "RawLabel",
    "VendorMapping",
    "canonicalize",
    "entry_json",
    "fetch_detections",
    "load_fixture",
    "map_response",
    "parse_fixture",
    "parse_fixture_entries",
    "record_checksum",
    "record_from_entry",
    "write_fixture",
]


@dataclass(frozen=True)
class RawLabel:
    """A label as a vendor reports it; ``confidence`` is on the vendor's scale."""

    name: str
    confidence: object

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise ValidationError(f"label name must be a non-empty string, got {self.name!r}")
        to_decimal(self.confidence, f"confidence of {self.name!r}")


@dataclass(frozen=True)
class DetectionRecord:
    """One image's canonical labels mapped to confidences in [0, 1]."""

    image_id: str
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.image_id, str):
            raise ValidationError(f"image_id must be a string, got {self.image_id!r}")
        clean = {}
        for name, conf in self.labels.items():
            if canonical_label(name) != name:
                raise ValidationError(f"label {name!r} is not canonical")
            clean[name] = check_probability(conf, f"confidence of {name!r}")
        object.__setattr__(self, "labels", dict(sorted(clean.items())))

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels.items())

    def __contains__(self, label):
        return label in self.labels

    def get(self, label, default=0.0):
        return self.labels.get(label, default)

    def restrict(self, keep):
        """Sub-record holding only labels for which ``keep(label)`` is true."""
        return DetectionRecord(self.image_id, {k: v for k, v in self.labels.items() if keep(k)})

    def raw_labels(self, scale=100):
        return [RawLabel(name, _from_unit(conf, scale)) for name, conf in self.labels.items()]


def _to_unit(value, scale, name):
    dec = to_decimal(value, f"confidence of {name!r}")
    scale = to_decimal(scale, "confidence_scale")
    if dec < 0 or dec > scale:
        raise ValidationError(f"confidence of {name!r} must lie in [0, {scale}], got {value}")
    return float(dec / scale)


def _from_unit(conf, scale=100):
    # exact decimal product: parse(write(x)) == x for every float x in [0, 1]
    return Decimal(repr(float(conf))) * to_decimal(scale)


def canonicalize(raw, image_id, scale=100):
    """Build a :class:`DetectionRecord` from vendor labels.

    Names are lowercased, trimmed and whitespace-collapsed, confidences are
    divided by ``scale``, and duplicate names keep their maximum confidence.

    >>> canonicalize([RawLabel("Finger", 61.10), RawLabel("Tie", 55.3)], "a").labels
    {'finger': 0.611, 'tie': 0.553}
    """
    labels = {}
    for item in raw:
        if not isinstance(item, RawLabel):
            item = RawLabel(*item)
        name = canonical_label(item.name)
        conf = _to_unit(item.confidence, scale, item.name)
        if name not in labels or conf > labels[name]:
            labels[name] = conf
    return DetectionRecord(image_id, labels)


# -- fixture files -----------------------------------------------------------


def _decode_json(data, source=None):
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc.reason}", pos=exc.start, source=source) from None
    else:
        text = data
    try:
        return json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno, pos=exc.pos, source=source) from None


def record_from_entry(entry, where="entry"):
    """Canonical record from one parsed fixture-entry object."""
    if not isinstance(entry, dict):
        raise ValidationError(f"{where}: expected an object")
    image_id = entry.get("image_id")
    if not isinstance(image_id, str):
        raise ValidationError(f"{where}: 'image_id' must be a string")
    labels = entry.get("labels")
    if not isinstance(labels, list):
        raise ValidationError(f"{where}: 'labels' must be an array")
    try:
        raw = []
        for j, lab in enumerate(labels):
            if not isinstance(lab, dict) or "name" not in lab or "confidence" not in lab:
                raise ValidationError(f"label {j} needs 'name' and 'confidence'")
            raw.append(RawLabel(lab["name"], lab["confidence"]))
        return canonicalize(raw, image_id)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def parse_fixture_entries(data, source=None):
    """Parse fixture bytes into ``(record, entry_dict)`` pairs.

    The raw entry is returned too so callers can read extra fields such as
    ``ground_truth``.
    """
    doc = _decode_json(data, source)
    if not isinstance(doc, list):
        raise ValidationError(f"{source or 'fixture'}: top level must be an array")
    return [
        (record_from_entry(entry, f"{source or 'fixture'} entry {idx}"), entry)
        for idx, entry in enumerate(doc)
    ]


def parse_fixture(data, source=None):
    """Parse fixture bytes into a list of records, preserving order."""
    return [rec for rec, _ in parse_fixture_entries(data, source)]


def load_fixture(path):
    path = Path(path)
    return parse_fixture(path.read_bytes(), source=str(path))


def _number(dec):
    text = format(dec.normalize(), "f")
    return text if text != "-0" else "0"


def entry_json(record, extra=None):
    """One fixture entry as compact JSON text with exact percentages."""
    labels = ", ".join(
        f'{{"name": {json.dumps(name)}, "confidence": {_number(_from_unit(conf))}}}'
        for name, conf in record.labels.items()
    )
    parts = [f'"image_id": {json.dumps(record.image_id)}']
    for key, value in (extra or {}).items():
        parts.append(f"{json.dumps(key)}: {json.dumps(value, sort_keys=True)}")
    parts.append(f'"labels": [{labels}]')
    return "{" + ", ".join(parts) + "}"


def write_fixture(records, extras=None):
    """Serialize records to fixture bytes.

    ``extras`` is an optional list (parallel to ``records``) of dicts whose
    keys are added to each entry, e.g. ``{"ground_truth": "fake"}``.
    """
    records = list(records)
    if extras is not None and len(extras) != len(records):
        raise ValidationError("extras must be parallel to records")
    if not records:
        return b"[]\n"
    lines = [
        "  " + entry_json(rec, extras[i] if extras else None) for i, rec in enumerate(records)
    ]
    return ("[\n" + ",\n".join(lines) + "\n]\n").encode("utf-8")


# -- remote detection --------------------------------------------------------


@dataclass(frozen=True)
class VendorMapping:
    """Where a vendor response keeps its labels.

    ``labels_path`` is a dotted path with optional ``[i]`` indices, e.g.
    ``"Labels"`` or ``"result.objects"``.
    """

    labels_path: str = "Labels"
    name_field: str = "Name"
    confidence_field: str = "Confidence"
    confidence_scale: float = 100.0

    def __post_init__(self):
        scale = to_decimal(self.confidence_scale, "confidence_scale")
        if scale <= 0:
            raise ValidationError(f"confidence_scale must be > 0, got {self.confidence_scale}")

    @classmethod
    def from_dict(cls, doc):
        known = {"labels_path", "name_field", "confidence_field", "confidence_scale"}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown vendor mapping fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        path = Path(path)
        doc = _decode_json(path.read_bytes(), str(path))
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: vendor mapping must be an object")
        return cls.from_dict(doc)


DEFAULT_MAPPING = VendorMapping()

_PATH_TOKEN = re.compile(r"([^.\[\]]+)|\[(\d+)\]")


def _walk(obj, path):
    trail = ""
    for m in _PATH_TOKEN.finditer(path):
        key, index = m.group(1), m.group(2)
        if key is not None:
            trail = f"{trail}.{key}" if trail else key
            if not isinstance(obj, dict) or key not in obj:
                raise MappingError("missing field", trail)
            obj = obj[key]
        else:
            trail = f"{trail}[{index}]"
            if not isinstance(obj, list) or int(index) >= len(obj):
                raise MappingError("missing index", trail)
            obj = obj[int(index)]
    return obj


def map_response(body, mapping, image_id):
    """Convert a vendor response body (bytes or parsed JSON) into a record."""
    if isinstance(body, (bytes, bytearray, str)):
        try:
            body = _decode_json(body)
        except ParseError as exc:
            raise MappingError(f"response is not JSON ({exc})", "<body>") from None
    items = _walk(body, mapping.labels_path)
    if not isinstance(items, list):
        raise MappingError("expected an array", mapping.labels_path)
    raw = []
    for i, item in enumerate(items):
        base = f"{mapping.labels_path}[{i}]"
        if not isinstance(item, dict):
            raise MappingError("expected an object", base)
        for fld in (mapping.name_field, mapping.confidence_field):
            if fld not in item:
                raise MappingError("missing field", f"{base}.{fld}")
        try:
            raw.append(RawLabel(item[mapping.name_field], item[mapping.confidence_field]))
        except ValidationError as exc:
            raise MappingError(str(exc), base) from None
    return canonicalize(raw, image_id, scale=mapping.confidence_scale)


@dataclass(frozen=True)
class EndpointConfig:
    """How to call a detection endpoint.

    ``mode="field"`` posts ``{image_field: image_ref}`` as JSON;
    ``mode="upload"`` posts the file at ``image_ref`` as multipart. The
    credential is read from ``api_key_env`` at request time and sent as
    ``auth_header: auth_prefix + key``.
    """

    base_url: str
    mode: str = "field"
    image_field: str = "image"
    extra_fields: dict = field(default_factory=dict)
    api_key_env: str = API_KEY_ENV
    auth_header: str = "Authorization"
    auth_prefix: str = "Bearer "
    timeout: float = 30.0

    def __post_init__(self):
        if self.mode not in ("field", "upload"):
            raise ValidationError(f"mode must be 'field' or 'upload', got {self.mode!r}")
        if not isinstance(self.base_url, str) or not self.base_url:
            raise ValidationError("base_url is required")

    @classmethod
    def load(cls, path):
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: endpoint config must be an object")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValidationError(f"{path}: {exc}") from None

    def headers(self):
        key = os.environ.get(self.api_key_env)
        return {self.auth_header: f"{self.auth_prefix}{key}"} if key else {}


class DetectionCache:
    """On-disk cache of canonical fixtures keyed by (endpoint, image_ref).

    Writes are atomic and serialized per key; a key being fetched blocks
    other fetches of the same key so only one request goes out.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self._guard = threading.Lock()
        self._locks = {}

    def path_for(self, endpoint, image_ref):
        digest = hashlib.sha256(f"{endpoint}\0{image_ref}".encode("utf-8")).hexdigest()
        return self.directory / f"{digest[:32]}.json"

    def lock_for(self, endpoint, image_ref):
        with self._guard:
            return self._locks.setdefault((endpoint, image_ref), threading.Lock())

    def get(self, endpoint, image_ref):
        path = self.path_for(endpoint, image_ref)
        if not path.exists():
            return None
        records = load_fixture(path)
        return records[0] if len(records) == 1 else None

    def put(self, endpoint, image_ref, record):
        from .io import atomic_write_bytes

        self.directory.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(self.path_for(endpoint, image_ref), write_fixture([record]))


def _request(endpoint, image_ref, session):
    import requests

    http = session or requests
    try:
        if endpoint.mode == "field":
            payload = dict(endpoint.extra_fields)
            payload[endpoint.image_field] = image_ref
            resp = http.post(endpoint.base_url, json=payload, headers=endpoint.headers(),
                             timeout=endpoint.timeout)
        else:
            with open(image_ref, "rb") as fh:
                resp = http.post(endpoint.base_url, data=dict(endpoint.extra_fields),
                                 files={endpoint.image_field: fh}, headers=endpoint.headers(),
                                 timeout=endpoint.timeout)
    except OSError as exc:
        # requests.RequestException subclasses OSError
        transient = not isinstance(exc, FileNotFoundError)
        raise RemoteError(f"request for {image_ref!r} failed: {type(exc).__name__}",
                          retryable=transient) from exc
    if not 200 <= resp.status_code < 300:
        raise RemoteError(
            f"detector answered HTTP {resp.status_code} for {image_ref!r}",
            status=resp.status_code,
            retryable=resp.status_code == 429 or resp.status_code >= 500,
        )
    return resp.content


def fetch_detections(endpoint, image_ref, mapping=DEFAULT_MAPPING, cache=None, session=None):
    """Run remote detection on ``image_ref`` and return a canonical record.

    With a :class:`DetectionCache`, a cached answer is returned without any
    network traffic and fresh answers are stored for offline reruns.
    """
    if cache is None:
        return map_response(_request(endpoint, image_ref, session), mapping, image_ref)
    with cache.lock_for(endpoint.base_url, image_ref):
        hit = cache.get(endpoint.base_url, image_ref)
        if hit is not None:
            log.debug("detection cache hit for %s", image_ref)
            return hit
        record = map_response(_request(endpoint, image_ref, session), mapping, image_ref)
        cache.put(endpoint.base_url, image_ref, record)
        return record


def record_checksum(records):
    """Order-independent SHA-256 of a set of records."""
    h = hashlib.sha256()
    for rec in sorted(records, key=lambda r: r.image_id):
        h.update(json.dumps([rec.image_id, [[k, repr(v)] for k, v in rec.labels.items()]]).encode())
        h.update(b"\n")
    return h.hexdigest()
