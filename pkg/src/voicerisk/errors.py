"""Exception taxonomy shared across the pipeline.

ConfigError maps to CLI exit code 2, DataError to exit code 3; any other
exception is treated as an internal error (exit code 4).
"""


class VoiceRiskError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(VoiceRiskError):
    """Invalid configuration, flags or run setup."""


class DataError(VoiceRiskError):
    """Invalid or inconsistent input data."""


# -- audio I/O ----------------------------------------------------------

class MalformedHeaderError(DataError):
    pass


class UnsupportedEncodingError(DataError):
    pass


class EmptyAudioError(DataError):
    pass


class SilentInputError(DataError):
    pass


# -- segmentation -------------------------------------------------------

class SchemaError(DataError):
    pass


class OverlapError(SchemaError):
    pass


class IndexOutOfRangeError(SchemaError):
    pass


class OutOfBoundsError(DataError):
    pass


# -- feature extraction -------------------------------------------------

class TooShortError(DataError):
    pass


class ZeroSpectrumError(DataError):
    pass


class NoVoicedRunError(DataError):
    pass


class EmptyTrackSetError(DataError):
    pass


# -- feature store ------------------------------------------------------

class DimMismatchError(DataError):
    pass


class DuplicateKeyError(DataError):
    pass


class NonFiniteValueError(DataError):
    pass


class MissingSegmentError(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        preview = ", ".join(str(m) for m in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"{len(self.missing)} segment(s) missing from feature source: {preview}{more}")


# -- normalization ------------------------------------------------------

class TooFewRowsError(DataError):
    pass


# -- modelling ----------------------------------------------------------

class SingleClassError(DataError):
    pass


class MissingTargetGenderError(ConfigError):
    pass


class DegenerateDataError(DataError):
    pass


# -- evaluation ---------------------------------------------------------

class TooFewSubjectsError(DataError):
    pass


class SingleClassTruthError(DataError):
    pass


class EmptyGroupError(DataError):
    pass


class DegenerateResamplingError(DataError):
    pass


class HeterogeneousModelsError(DataError):
    pass


# -- synthesis ----------------------------------------------------------

class InvalidSpecError(ConfigError):
    pass
