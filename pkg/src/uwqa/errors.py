"""Exception types shared across the toolkit."""


class UwqaError(Exception):
    """Base class for all toolkit errors."""


class DecodeError(UwqaError):
    """Raised when an image stream is malformed or in an unsupported format."""


class InvalidPartition(UwqaError):
    """Raised when a block grid does not fit inside a plane."""


class MetricError(UwqaError):
    """Raised when a quality metric is undefined for the given image."""


class EmptyInput(UwqaError):
    """Raised when an operation receives an empty sequence."""


class AllOutliers(UwqaError):
    """Raised when outlier replacement has no clean values left to draw from."""


class DegenerateMetric(UwqaError):
    """Raised when a metric is constant across the pooled table (min == max)."""


class UnknownModel(UwqaError):
    """Raised when a model id is not present in a table."""


class OutOfRange(UwqaError):
    """Raised when a value falls outside its documented domain."""


class MixedImage(UwqaError):
    """Raised when records that must share one image id do not."""


class UnknownClass(UwqaError):
    """Raised when a record references a class id outside the declared list."""


class ConstantInput(UwqaError):
    """Raised when a correlation input has zero variance."""


class NoOverlap(UwqaError):
    """Raised when two keyed collections share no model ids."""


class SchemaError(UwqaError):
    """Raised when an input file does not match its documented schema."""


class LayoutError(UwqaError):
    """Raised when a dataset directory violates the layout contract."""


class IoError(UwqaError):
    """Raised when an export destination cannot be written."""
