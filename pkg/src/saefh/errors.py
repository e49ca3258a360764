"""Exception and warning types raised by saefh."""

from __future__ import annotations


class SaeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDatasetError(SaeError, ValueError):
    """Input data violates a structural precondition (shape, sign, m > p)."""


class SingularDesignError(SaeError, ValueError):
    """The (weighted) normal-equation matrix is not positive definite."""


class SolverFailureError(SaeError, RuntimeError):
    """The moment-equation root finder did not converge.

    ``bracket`` holds the last ``(lo, hi)`` interval and ``area`` names the
    deleted area when the failure occurred inside a leave-one-out refit.
    """

    def __init__(self, message, bracket=None, area=None):
        super().__init__(message)
        self.bracket = bracket
        self.area = area


class UndefinedKurtosisError(SaeError, ValueError):
    """Kurtosis requested for a sample with zero estimated variance."""


class UndefinedRatioError(SaeError, ZeroDivisionError):
    """A relative error was requested against a zero reference value."""


class StudyAbortedError(SaeError, RuntimeError):
    """Too many replicates failed for the Monte Carlo study to be trusted."""


class RegularityWarning(UserWarning):
    """Design looks far from the bounded-leverage / bounded-variance regime."""
