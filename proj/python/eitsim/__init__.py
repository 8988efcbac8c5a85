from _eitsim import *  # noqa: F401,F403
from _eitsim import __doc__  # noqa: F401
