"""Multitone qubit drive predistortion.

Thin wrapper over the compiled ``_core`` extension. Signals are 1-D
``complex128`` numpy arrays; memory polynomial coefficients are ``(K, L)``
arrays indexed ``[k - 1, l]``.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
