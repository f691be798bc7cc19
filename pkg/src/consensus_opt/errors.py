"""Exception types raised by the library."""


class ConsensusOptError(ValueError):
    """Base class for all library-specific errors."""


class NegativeOffDiagonal(ConsensusOptError):
    def __init__(self, i: int, j: int, value: float):
        self.index = (i, j)
        self.value = value
        super().__init__(
            f"off-diagonal entry ({i}, {j}) = {value!r} is negative; "
            "not an admissible interaction rate"
        )


class RowSumViolation(ConsensusOptError):
    def __init__(self, row: int, value: float, tol: float):
        self.row = row
        self.value = value
        super().__init__(
            f"row {row} sums to {value!r}, exceeding tolerance {tol!r}"
        )


class DimensionMismatch(ConsensusOptError):
    pass


class InvalidPermutation(ConsensusOptError):
    pass


class SimplexViolation(ConsensusOptError):
    pass


class TerminalNotZeroSum(ConsensusOptError):
    pass


class ExponentialOverflow(ConsensusOptError):
    pass


class BasisNotAdapted(ConsensusOptError):
    pass


class DimensionNotTwo(ConsensusOptError):
    pass


class DimensionNotThree(ConsensusOptError):
    pass


class RequiresTwoSubsystems(ConsensusOptError):
    pass


class NotHurwitz(ConsensusOptError):
    pass


class ProblemFileError(ConsensusOptError):
    """Raised for malformed or schema-violating problem files."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)
