"""Exception types shared across the accountant."""

from __future__ import annotations


class ParameterDomainError(ValueError):
    """A parameter lies outside the domain where the quantity is defined."""


class ApplicabilityError(ValueError):
    """A closed-form bound was requested outside its validity regime.

    ``max_eps0`` carries the largest local epsilon for which the bound
    applies at the given ``n`` and ``delta`` (``None`` when the condition is
    not expressed through eps0).
    """

    def __init__(self, message: str, max_eps0: float | None = None):
        super().__init__(message)
        self.max_eps0 = max_eps0
