"""
Custom exceptions for trollscope

Every exception carries the exit code the command line reports for it:
1 usage error, 2 data/validation error, 3 internal invariant violation.
"""


class TrollScopeException(Exception):
    """Base exception for all trollscope errors"""

    def __init__(self, message: str, exit_code: int = 3):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code


class UsageError(TrollScopeException):
    """Raised when the command line is used incorrectly"""

    def __init__(self, message: str):
        super().__init__(message, exit_code=1)


class ValidationError(TrollScopeException):
    """Raised when input data fails validation"""

    def __init__(self, message: str, field: str = None):
        super().__init__(message, exit_code=2)
        self.field = field


class ConfigError(ValidationError):
    """Raised when a configuration file or override is invalid"""


class MalformedRecordError(ValidationError):
    """Raised when an event log line cannot be parsed"""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"malformed record at line {line_no}: {reason}")
        self.line_no = line_no


class UnknownEventKindError(ValidationError):
    """Raised when an event kind is outside the closed taxonomy"""

    def __init__(self, kind: str, line_no: int):
        super().__init__(f"unknown event kind '{kind}' at line {line_no}", field="kind")
        self.kind = kind
        self.line_no = line_no


class UnknownLabelError(ValidationError):
    """Raised when an account label string is not recognised"""

    def __init__(self, value: str, line_no: int = None):
        message = f"unknown account class '{value}'"
        if line_no is not None:
            message += f" at line {line_no}"
        super().__init__(message, field="class")
        self.value = value


class LabelConflictError(ValidationError):
    """Raised when one account carries two different labels"""

    def __init__(self, account_id: str):
        super().__init__(f"conflicting labels for account '{account_id}'")
        self.account_id = account_id


class InvalidPairError(ValidationError):
    """Raised for the unobservable (NO, no) state-action pair"""

    def __init__(self, state: str, action: str):
        super().__init__(f"invalid state-action pair ({state}, {action})")


class InvalidCodeError(ValidationError):
    """Raised when a symbol code is outside the alphabet"""

    def __init__(self, code: int, upper: int = 10):
        super().__init__(f"symbol code {code} outside [0, {upper}]")
        self.code = code


class WindowLengthError(ValidationError):
    """Raised when a window length is not a positive integer"""

    def __init__(self, window_length: int):
        super().__init__(f"window length must be >= 1, got {window_length}")


class UnlabeledAccountError(ValidationError):
    """Raised when an account needed for training has no label"""

    def __init__(self, account_id: str):
        super().__init__(f"account '{account_id}' has no label")
        self.account_id = account_id


class EmptyInputError(ValidationError):
    """Raised when an operation needs at least one element"""


class EmptyDatasetError(EmptyInputError):
    """Raised when a trajectory dataset is empty"""


class EmptyClassError(ValidationError):
    """Raised when one class of a dataset has no members"""


class InsufficientClassMembersError(ValidationError):
    """Raised when a class cannot fill every fold"""


class SingleClassError(ValidationError):
    """Raised when a metric needs both classes but receives one"""


class LengthMismatchError(ValidationError):
    """Raised when aligned inputs have different lengths"""


class UnscorableAccountError(ValidationError):
    """Raised when an account sequence is shorter than the window length"""

    def __init__(self, account_id: str, length: int, window_length: int):
        super().__init__(
            f"account '{account_id}' has {length} pairs, fewer than L={window_length}"
        )
        self.account_id = account_id
        self.length = length


class ModelFileError(ValidationError):
    """Base class for model file problems"""


class NotAModelFileError(ModelFileError):
    """Raised when the magic bytes do not match"""

    def __init__(self, path: str = None):
        message = "not a model file"
        if path:
            message += f": {path}"
        super().__init__(message)


class ModelVersionError(ModelFileError):
    """Raised when the model file format version is unsupported"""

    def __init__(self, found: int, expected: int):
        super().__init__(f"model format version {found} unsupported (expected {expected})")
        self.found = found


class TruncatedModelError(ModelFileError):
    """Raised when the model file ends early"""

    def __init__(self):
        super().__init__("truncated model file")


class ModelDimensionError(ModelFileError):
    """Raised when the declared dimensions disagree with the payload"""


class InvariantViolationError(TrollScopeException):
    """Raised when an internal invariant does not hold"""

    def __init__(self, message: str):
        super().__init__(message, exit_code=3)


class MissingCacheError(InvariantViolationError):
    """Raised when backward is called without a training-mode forward cache"""

    def __init__(self):
        super().__init__("backward requires the cache of a train-mode forward pass")
