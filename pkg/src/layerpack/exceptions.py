class ValidationError(ValueError):
    """Malformed input: bad tokens, non-bijections, hypothesis violations."""


class ResourceGuardError(RuntimeError):
    """An enumeration would exceed its configured size guard."""
