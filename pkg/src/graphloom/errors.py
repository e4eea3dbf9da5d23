"""Exception hierarchy shared across the package."""


class GraphloomError(Exception):
    """Base class for all package errors."""


class JsonPathError(GraphloomError):
    """Raised when a selector pattern uses unsupported syntax."""


class SchemaError(GraphloomError):
    """Raised when a schema document cannot be parsed or fails validation."""


class CodecError(GraphloomError):
    """Raised when a value cannot be converted between human and numeric form."""


class TensorShapeError(GraphloomError):
    """Raised when tensor operands have incompatible shapes."""


class AssemblyError(GraphloomError):
    """Raised when a schema cannot be compiled into a model."""


class CheckpointError(GraphloomError):
    """Raised on corrupt or incompatible checkpoint files."""


class TrainingDiverged(GraphloomError):
    """Raised when the loss becomes non-finite during training."""

    def __init__(self, message, property_name=None, batch_index=None):
        super().__init__(message)
        self.property_name = property_name
        self.batch_index = batch_index
