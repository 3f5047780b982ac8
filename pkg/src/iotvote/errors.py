"""Exception hierarchy. The CLI maps every IotVoteError to exit code 2."""


class IotVoteError(Exception):
    pass


class DataError(IotVoteError):
    """Bad input data: unparsable CSV, wrong arity, unknown labels."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ImputationError(DataError):
    pass


class MergeError(DataError):
    pass


class SplitError(DataError):
    pass


class TaskError(DataError):
    pass


class ModelError(IotVoteError):
    pass


class FitError(ModelError):
    pass


class PredictError(ModelError):
    pass


class ParameterError(ModelError, ValueError):
    pass


class DomainError(IotVoteError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class VoteError(DomainError):
    pass


class ModelFormatError(ModelError):
    """Unreadable or incompatible model file."""
