"""Exception types shared across the engine."""


class MedError(Exception):
    """Base class for all engine errors."""


class SchemaError(MedError):
    """A document (or config) violates the interchange schema.

    ``path`` names the offending field, e.g. ``sentences[2].tokens[0].char_end``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class RangeError(MedError):
    """A span does not fit inside the document it points into."""


class IoError(MedError):
    """A referenced file is missing or unreadable."""


class NetworkError(MedError):
    """A remote service (NLP server, geocoder) could not be reached."""


class ProtocolError(MedError):
    """A remote response is missing a requested annotation layer."""

    def __init__(self, layer: str):
        self.layer = layer
        super().__init__(f"annotation layer missing from response: {layer}")


class ConfigError(MedError):
    """A scoring/config file is malformed or carries unknown keys."""


class DegenerateDocument(MedError):
    """Scoring was asked about a document with no sentences."""


class InvariantViolation(MedError):
    """Internal pipeline invariant broken (e.g. a 'what' without its 'who')."""


class MissingPubDate(MedError):
    """A relative temporal expression cannot be resolved without a publish date."""


class AllOovError(MedError):
    """A phrase has no in-vocabulary token; no distance can be computed."""


class ArityError(MedError):
    """An aggregate needs more inputs than were supplied (e.g. <2 annotators)."""
