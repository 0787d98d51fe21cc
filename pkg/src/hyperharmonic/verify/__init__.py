"""Numerical checks of the potential theory, the constants and the main inequality chain."""
from .chain import *  # noqa: F401,F403
from .constants import *  # noqa: F401,F403
from .sets import *  # noqa: F401,F403
from .sphere import *  # noqa: F401,F403
from . import chain, constants, sets, sphere

__all__ = chain.__all__ + constants.__all__ + sets.__all__ + sphere.__all__
