"""FmapForge exceptions.

Two families, mapped to CLI exit codes: input/validation problems (exit 2)
and numerical failures (exit 3).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any


class FmapForgeError(Exception):
    """Base class for all FmapForge errors.

    Attributes:
        exit_code: Process exit code the CLI uses for this error.
    """

    exit_code: int = 1


# ---------------------------------------------------------------------------
# Input / validation errors
# ---------------------------------------------------------------------------


class InputError(FmapForgeError):
    """Invalid input: malformed files, bad arguments, mismatched shapes."""

    exit_code = 2


class ParseError(InputError):
    """Raised when a mesh, map or feature file cannot be parsed.

    Attributes:
        path: File being read, if known.
        line: 1-based line number of the offending content, if known.
    """

    def __init__(
        self, message: str, path: str | Path | None = None, line: int | None = None
    ) -> None:
        """Initialize ParseError.

        Args:
            message: Error description.
            path: File being read.
            line: 1-based line number.
        """
        self.path = Path(path) if path is not None else None
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class DegenerateMesh(InputError):
    """Mesh connectivity violates the TriangleMesh invariants."""


class DimensionMismatch(InputError):
    """Array shapes are incompatible.

    Attributes:
        expected: Expected shape or size description.
        actual: Actual shape or size description.
    """

    def __init__(self, message: str, expected: Any = None, actual: Any = None) -> None:
        """Initialize DimensionMismatch.

        Args:
            message: Error description.
            expected: Expected shape.
            actual: Actual shape.
        """
        self.expected = expected
        self.actual = actual
        super().__init__(message)


class KTooLarge(InputError):
    """Requested basis size is not smaller than the vertex count."""


class GammaOutOfRange(InputError):
    """Resolvent mask shape parameter is outside (0, 1]."""


class ProvenanceMismatch(InputError):
    """A functional map has the wrong provenance for the requested operation."""


class BasisMeshMismatch(InputError):
    """A point map and a spectral basis refer to meshes of different sizes."""


class BasisTooSmall(InputError):
    """A refinement target exceeds the available basis size."""


class LengthMismatch(InputError):
    """Predicted and ground-truth correspondences differ in length."""


class EmptyInput(InputError):
    """No usable input was found (e.g. an empty results directory)."""


class InvalidArgument(InputError):
    """An argument is outside its documented range."""


# ---------------------------------------------------------------------------
# Numerical errors
# ---------------------------------------------------------------------------


class NumericalError(FmapForgeError):
    """A numerical procedure failed or produced unusable values."""

    exit_code = 3


class DegenerateGeometry(NumericalError):
    """A face is too small for a stable cotangent Laplacian.

    Attributes:
        face: Index of the offending face.
        area: Its area.
    """

    def __init__(self, message: str, face: int | None = None, area: float | None = None) -> None:
        """Initialize DegenerateGeometry.

        Args:
            message: Error description.
            face: Offending face index.
            area: Face area.
        """
        self.face = face
        self.area = area
        super().__init__(message)


class DisconnectedMesh(NumericalError):
    """Some vertices are unreachable along mesh edges.

    Attributes:
        distances: Distance vector with ``inf`` for unreachable vertices.
    """

    def __init__(self, message: str, distances: Any = None) -> None:
        """Initialize DisconnectedMesh.

        Args:
            message: Error description.
            distances: Distance vector computed before the failure.
        """
        self.distances = distances
        super().__init__(message)


class ConvergenceFailure(NumericalError):
    """The eigensolver did not converge or missed the residual tolerance."""


class DegenerateSpectrum(NumericalError):
    """Fewer than two nonzero eigenvalues are available for a descriptor."""


class DegenerateFeatures(NumericalError):
    """A feature matrix has an all-zero row."""


class SingularSystem(NumericalError):
    """A row system of the functional map solve is numerically singular.

    Attributes:
        row: Row index of C whose system failed.
        condition: Estimated condition number.
    """

    def __init__(self, message: str, row: int, condition: float) -> None:
        """Initialize SingularSystem.

        Args:
            message: Error description.
            row: Failing row.
            condition: Condition number of the row system.
        """
        self.row = row
        self.condition = condition
        super().__init__(message)


class NonFiniteLoss(NumericalError):
    """Parameter adaptation hit a non-finite loss or gradient.

    Attributes:
        last_params: Last parameters with a finite loss.
        trace: Accepted trace entries recorded before the failure.
    """

    def __init__(self, message: str, last_params: Any = None, trace: Any = None) -> None:
        """Initialize NonFiniteLoss.

        Args:
            message: Error description.
            last_params: Last good SolverParams.
            trace: Trace entries accepted so far.
        """
        self.last_params = last_params
        self.trace = trace if trace is not None else []
        super().__init__(message)


class RankDeficientDraw(NumericalError):
    """Random coefficient draws stayed rank deficient after all retries."""


class UnreachableVertex(NumericalError):
    """Every evaluated vertex was unreachable from its ground-truth target."""


class MonotonicityViolation(NumericalError):
    """An adaptation trace increased at an accepted step."""
