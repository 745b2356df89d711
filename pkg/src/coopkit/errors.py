"""Exception types shared across the toolkit."""

from __future__ import annotations


class CoopkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidQuaternionError(CoopkitError):
    """Quaternion norm too far from 1 to be treated as a rotation."""


class FrameMismatchError(CoopkitError):
    """Coordinate frames of the operands do not chain."""


class EstimationError(CoopkitError):
    """A least-squares fit had too few or degenerate inputs."""


class RegistrationError(CoopkitError):
    """Point cloud alignment failed to produce a usable pose."""


class ParseError(CoopkitError):
    """A file could not be parsed.

    ``location`` carries whatever position information the parser had:
    a JSON path, a line number, or a byte offset.
    """

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message if location is None else f"{message} ({location})")
        self.location = location


class ConcurrentWriteError(CoopkitError):
    """A label write was based on a stale revision."""

    def __init__(self, message: str, latest_revision: int):
        super().__init__(message)
        self.latest_revision = latest_revision
