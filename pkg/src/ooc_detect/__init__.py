"""One-shot fake image detection from out-of-context object detections."""

from .detections import (
    DEFAULT_MAPPING,
    DetectionCache,
    DetectionRecord,
    EndpointConfig,
    RawLabel,
    VendorMapping,
    canonicalize,
    fetch_detections,
    load_fixture,
    parse_fixture,
    write_fixture,
)
from .exceptions import (
    CompatibilityError,
    FitError,
    MappingError,
    NumericError,
    OOCError,
    ParseError,
    RemoteError,
    ValidationError,
)
from .features import (
    ContextWhitelist,
    OOCVectorizer,
    SparseVector,
    Vocabulary,
    build_vocabulary,
    default_whitelist,
    ooc_split,
    vectorize,
)
from .harness import EvalReport, LabeledSet, compare, emit_report, evaluate, load_labeled_set
from .oneshot import OneShotOOCClassifier, Verdict, classify, classify_batch, cosine, fit

__version__ = "0.1.0"
