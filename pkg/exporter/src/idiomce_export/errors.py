"""Typed errors for the exporter."""


class ExporterError(Exception):
    """Base class for exporter failures."""


class ModelUnavailable(ExporterError):
    pass


class EmptyField(ExporterError):
    def __init__(self, idiom_id: str, field: str):
        self.idiom_id = idiom_id
        self.field = field
        super().__init__(f"idiom {idiom_id!r}: cultural field {field!r} is empty")


class UnparseableReply(ExporterError):
    def __init__(self, idiom_id: str, reason: str = ""):
        self.idiom_id = idiom_id
        self.reason = reason
        super().__init__(f"idiom {idiom_id!r}: unparseable reply ({reason})")


class ProviderError(ExporterError):
    pass


class MalformedCorpus(ExporterError):
    pass
