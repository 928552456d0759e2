from .logger import ExperimentLogger
from .timer import Timer
__all__ = ["ExperimentLogger", "Timer"]
