"""Exception hierarchy shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class ConfigError(EngineError):
    """Invalid configuration (frequency ordering, Nyquist violation, bad sizes)."""


class OrderingError(EngineError):
    """Samples, triggers or ticks arrived out of time order."""


class InputError(EngineError):
    """A value fell outside its documented domain."""


class TrainingError(EngineError):
    """Classifier training could not proceed (e.g. single-class data)."""


class CalibrationError(EngineError):
    """Cross-validation could not be set up (too few samples to stratify)."""


class CalibrationAbort(EngineError):
    """Calibration failed repeatedly and the session was aborted."""


class ProtocolError(EngineError):
    """Illegal protocol phase transition or out-of-phase request."""


class SchemaError(EngineError):
    """A recorded file failed format or schema validation."""


class RecorderError(EngineError):
    """A session file could not be written or read."""
