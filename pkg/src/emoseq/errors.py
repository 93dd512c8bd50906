"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(RuntimeError):
    """A caller violated an operation's precondition."""


class NumericError(ArithmeticError):
    """Non-finite values showed up where finite math was required."""


class FormatError(ValueError):
    """A data file violates its expected format."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class IntegrityError(ValueError):
    """A checkpoint payload does not match its manifest."""
