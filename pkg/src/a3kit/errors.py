"""Exception hierarchy shared by every a3kit module."""


class A3Error(Exception):
    """Base class for all toolkit errors."""

    kind = "error"


class UrdfParseError(A3Error):
    """Malformed URDF XML."""

    kind = "parse"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class StructureError(A3Error):
    """Joint graph is not a tree (cycle, orphan, multiple parents, unknown link)."""

    kind = "structure"


class UrdfValidationError(A3Error):
    """URDF element violates a joint or link invariant."""

    kind = "validation"


class JointConfigError(A3Error):
    kind = "config"


class ConfigError(A3Error):
    """Invalid toolkit configuration (TOML overrides, CLI settings, rule tables)."""

    kind = "config"


class GeometryError(A3Error):
    kind = "geometry"


class DomainError(A3Error):
    kind = "domain"


class DegenerateRangeError(DomainError):
    kind = "degenerate_range"


class NotMovableError(A3Error):
    kind = "not_movable"


class ContactError(A3Error):
    kind = "no_contact"


class DegenerateTrajectoryError(A3Error):
    kind = "degenerate"


class DetachedError(A3Error):
    """The attached link could not follow the end effector."""

    kind = "detached"

    def __init__(self, q: float, residual: float):
        super().__init__(f"Attachment broke with residual {residual:.4f} m")
        self.q = q
        self.residual = residual


class AnswerParseError(A3Error):
    kind = "answer_parse"


class ArityError(AnswerParseError):
    kind = "arity"


class TransportError(A3Error):
    kind = "transport"


class FixtureNotFoundError(A3Error, LookupError):
    kind = "lookup"
