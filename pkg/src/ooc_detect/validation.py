"""Input validation helpers used by the estimators and the functional API."""

import math
from collections.abc import Mapping
from decimal import Decimal, InvalidOperation

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "canonical_label",
    "check_probability",
    "check_finite_number",
    "check_records",
    "to_decimal",
]


def canonical_label(name):
    """Lowercase, trim and collapse internal whitespace."""
    if not isinstance(name, str):
        raise ValidationError(f"label name must be a string, got {type(name).__name__}")
    label = " ".join(name.split()).lower()
    if not label:
        raise ValidationError("label name is empty after trimming")
    return label


def to_decimal(value, what="value"):
    """Exact decimal view of a JSON-ish number.

    Floats go through ``repr`` so ``55.3`` stays ``55.3`` rather than its
    binary expansion; dividing that by 100 then rounds once, to ``0.553``.
    """
    if isinstance(value, bool) or value is None:
        raise ValidationError(f"{what} must be a number, got {value!r}")
    if isinstance(value, Decimal):
        dec = value
    elif isinstance(value, (int, np.integer)):
        dec = Decimal(int(value))
    elif isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValidationError(f"{what} is not finite: {value!r}")
        dec = Decimal(repr(float(value)))
    elif isinstance(value, str):
        try:
            dec = Decimal(value)
        except InvalidOperation:
            raise ValidationError(f"{what} is not a number: {value!r}") from None
    else:
        raise ValidationError(f"{what} must be a number, got {type(value).__name__}")
    if not dec.is_finite():
        raise ValidationError(f"{what} is not finite: {value!r}")
    return dec


def check_finite_number(value, name):
    if isinstance(value, bool):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


def check_probability(value, name):
    """Return ``value`` as float, raising unless it lies in [0, 1]."""
    value = check_finite_number(value, name)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_records(X, *, allow_empty=True, name="X"):
    """Coerce ``X`` into a list of :class:`DetectionRecord`.

    Accepts records or plain ``{label: confidence}`` mappings (confidences
    already in [0, 1]); mappings get positional image ids.
    """
    from .detections import DetectionRecord

    if isinstance(X, (DetectionRecord, Mapping, str, bytes)):
        raise ValidationError(f"{name} must be a sequence of detection records")
    try:
        items = list(X)
    except TypeError:
        raise ValidationError(f"{name} must be a sequence of detection records") from None
    if not items and not allow_empty:
        raise ValidationError(f"{name} is empty")
    out = []
    for i, item in enumerate(items):
        if isinstance(item, DetectionRecord):
            out.append(item)
        elif isinstance(item, Mapping):
            out.append(DetectionRecord(f"{name}[{i}]", {canonical_label(k): v for k, v in item.items()}))
        else:
            raise ValidationError(
                f"{name}[{i}] must be a DetectionRecord or mapping, got {type(item).__name__}"
            )
    return out
