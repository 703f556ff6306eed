"""Exception types shared across the package.

All user-facing errors derive from either ``InputError`` (bad arguments,
malformed data, incompatible shapes) or ``NumericalError`` (a computation
that could not be completed stably).  CLI entry points map the former to
exit code 1 and the latter to exit code 2.
"""

from __future__ import annotations


class InputError(ValueError):
    """Invalid argument, configuration, or incompatible shapes."""


class DataError(InputError):
    """Malformed or inconsistent data encountered while loading a dataset."""


class NumericalError(ArithmeticError):
    """A numerical operation failed beyond the configured safeguards."""


class NumericalWarning(RuntimeWarning):
    """A numerical safeguard activated and silently repaired a quantity."""
