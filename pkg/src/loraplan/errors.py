"""Exception types shared across the package."""


class LoraPlanError(Exception):
    """Base class for all package errors."""


class DomainError(LoraPlanError, ValueError):
    """An argument lies outside the domain of a model or formula."""


class ConfigurationError(LoraPlanError, ValueError):
    """Site or radio configuration lacks a required entry."""


class SiteParseError(LoraPlanError, ValueError):
    """Malformed site or trajectory document."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class SiteValidationError(LoraPlanError, ValueError):
    """Site violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid site:\n" + "\n".join(self.violations))
