"""Exception hierarchy shared across the package.

Every error carries an ``exit_code`` used by the command-line front end:
2 for configuration problems, 3 for data problems and 4 for numerical
failures.
"""


class SimharError(Exception):
    exit_code = 3


class ConfigError(SimharError, ValueError):
    exit_code = 2


class DataError(SimharError, ValueError):
    exit_code = 3


class NumericalError(SimharError, ArithmeticError):
    exit_code = 4


# skeleton validation
class SkeletonError(DataError):
    pass


class CycleDetected(SkeletonError):
    pass


class MultipleRoots(SkeletonError):
    pass


class NonPositiveBoneLength(SkeletonError):
    pass


# sequences and file formats
class EmptySequence(DataError):
    pass


class FormatError(DataError):
    pass


class BadMagic(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class TruncatedPayload(FormatError):
    pass


class NonFiniteValue(FormatError):
    pass


# simulation
class TooFewFrames(DataError):
    pass


class DegenerateBone(DataError):
    pass


# generation and dataset assembly
class UnknownFamily(ConfigError):
    pass


class IoFailure(DataError):
    pass


class InsufficientRecords(DataError):
    pass


class EmptyResult(DataError):
    pass


# encoder
class ShapeMismatch(DataError):
    pass


class DegenerateBatch(DataError):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, message, batch_ids=()):
        super().__init__(message)
        self.batch_ids = list(batch_ids)


# evaluation
class UnknownJointName(DataError):
    pass


class EmptyTrainSet(DataError):
    pass


class LengthMismatch(DataError):
    pass


class OracleMiss(NumericalError):
    pass
