"""Bird view synthesis: geometry, data generation, training and metrics."""

from _bridgegan import *  # noqa: F401,F403
from _bridgegan import __version__, checkpoint_version  # noqa: F401
