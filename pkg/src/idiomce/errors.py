"""Typed exception hierarchy shared across the package.

Every domain failure raises a subclass of :class:`IdiomCEError`, so callers
(and the CLI) can catch one type and map it to a non-zero exit code while
programmer errors (TypeError, OSError, ...) propagate untouched.
"""


class IdiomCEError(Exception):
    """Base class for all domain errors raised by this package."""


# --- corpus / file formats -------------------------------------------------

class MalformedLine(IdiomCEError):
    def __init__(self, line_no: int, reason: str = "not a JSON object"):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class MissingField(IdiomCEError):
    def __init__(self, name: str, line_no: int | None = None):
        self.name = name
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"missing field {name!r}{where}")


class DuplicateId(IdiomCEError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"duplicate id {id!r}")


class BadMagic(IdiomCEError):
    pass


class TruncatedFile(IdiomCEError):
    pass


class DimMismatch(IdiomCEError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch: expected {expected}, got {got}")


class CorruptGraph(IdiomCEError):
    pass


class ManifestError(IdiomCEError):
    pass


# --- statistics / graph construction ---------------------------------------

class ZeroVector(IdiomCEError):
    pass


class TooFewSamples(IdiomCEError):
    pass


class DegenerateDistribution(IdiomCEError):
    pass


class EmptySide(IdiomCEError):
    pass


class MissingEmbedding(IdiomCEError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"no embedding row for id {id!r}")


# --- numeric core -----------------------------------------------------------

class InvalidShape(IdiomCEError):
    pass


class ShapeMismatch(IdiomCEError):
    pass


class NonFiniteLoss(IdiomCEError):
    pass


class LengthMismatch(IdiomCEError):
    pass


# --- training / evaluation --------------------------------------------------

class ExhaustedNonEdges(IdiomCEError):
    pass


class TooFewEdges(IdiomCEError):
    pass


class EmptyTrainSplit(IdiomCEError):
    pass


class EmptyTestSet(IdiomCEError):
    pass


class EmptySet(IdiomCEError):
    pass


# --- contrastive / inference ------------------------------------------------

class NoNegativesAvailable(IdiomCEError):
    pass


class NoSimilarNeighbor(IdiomCEError):
    pass


class EmptyTargetPool(IdiomCEError):
    pass


class UnknownNode(IdiomCEError):
    def __init__(self, id: str):
        self.id = id
        super().__init__(f"unknown node {id!r}")


class PivotVocabularyMismatch(IdiomCEError):
    pass


# --- LLM plumbing -----------------------------------------------------------

class ProviderError(IdiomCEError):
    pass


class TemplateError(IdiomCEError):
    pass
