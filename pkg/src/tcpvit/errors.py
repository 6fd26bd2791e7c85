"""Exception types raised across the package."""


class TCPViTError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(TCPViTError, ValueError):
    pass


class ShapeError(TCPViTError, ValueError):
    pass


class ChannelError(ShapeError):
    """Tube lengths of two operands (or an operand and a plan) disagree."""


class SingularSliceError(TCPViTError, ArithmeticError):
    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"DCT-domain slice {index} is singular")


class ConfigError(TCPViTError, ValueError):
    pass


class DataError(TCPViTError, ValueError):
    pass


class CheckpointError(TCPViTError, ValueError):
    pass
