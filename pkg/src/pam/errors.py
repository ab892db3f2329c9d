"""Error taxonomy shared by every module.

Each error carries a machine-readable ``kind`` so the CLI can emit
``{"error": kind, "detail": ...}`` payloads with exit code 1.
"""

from __future__ import annotations


class PamError(Exception):
    """Base class; ``kind`` is a stable machine-readable tag."""

    kind = "error"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidArgument(PamError):
    kind = "invalid-argument"


class DomainError(PamError):
    """A point or payload lies outside the exactly-representable domain."""

    kind = "domain"


class NonSquareAtom(PamError):
    """An atom mass that must be the square of a rational is not one."""

    kind = "non-square-atom"


class UnsupportedPrime(PamError):
    """No default probability factor exists for this value prime."""

    kind = "unsupported-prime"


class RefineRequired(PamError):
    """The integrand is finer than the stochastic measure's atom level;
    rebuild the stochastic measure at a deeper level instead of mutating it."""

    kind = "refine-xi-required"


class DivisionByZeroAtom(PamError):
    """Inversion requested where the weight vanishes on a named atom."""

    kind = "division-by-zero"


class TimesDegenerate(PamError):
    """The character matrix for the supplied times is singular."""

    kind = "times-degenerate"
