"""Privacy-preserving group fairness audits over secret-shared models and data."""

from .ring import FixedPointCodec
from .sharing import Scheme

__all__ = ["FixedPointCodec", "Scheme"]
__version__ = "0.1.0"
