#!/usr/bin/env python3
"""
DFM Error Types
===============
Exception hierarchy shared by every execution script.

The CLI maps these onto exit codes:
    InputFormatError / ParameterError / NumericInputError -> 2
    IdentifiabilityError                                  -> 3
"""

from typing import Optional


class DFMError(Exception):
    """Base class for all quantification errors."""


class ParameterError(DFMError, ValueError):
    """A parameter is out of its documented range."""


class NumericInputError(DFMError, ValueError):
    """Input data contains NaN or infinite values."""


class InputFormatError(DFMError, ValueError):
    """A dataset or prediction file is malformed."""


class IdentifiabilityError(DFMError):
    """
    The class embeddings do not determine the proportions.

    Raised when the Gram spectrum is (numerically) singular in the direction
    the requested problem needs.
    """

    def __init__(self, message: str,
                 lambda_min: Optional[float] = None,
                 delta_min: Optional[float] = None):
        super().__init__(message)
        self.lambda_min = lambda_min
        self.delta_min = delta_min


class IdentifiabilityWarning(UserWarning):
    """Gram matrix is close to singular; estimates may not be unique."""
