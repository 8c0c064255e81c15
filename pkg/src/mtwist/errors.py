"""Exception types shared across the package."""
from __future__ import annotations


class MtwistError(Exception):
    """Base class for all package errors."""


class ExprSyntaxError(MtwistError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnboundVariableError(MtwistError):
    def __init__(self, name: str, offset: int | None = None):
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"unbound variable {name!r}{where}")
        self.name = name
        self.offset = offset


class DomainError(MtwistError):
    """A function was evaluated outside its real domain (log of 0, sqrt of -1...)."""


class DimensionError(MtwistError):
    pass


class IntegrationBlowup(MtwistError):
    def __init__(self, t_last: float, message: str = "non-finite state"):
        super().__init__(f"{message}; last good t = {t_last!r}")
        self.t_last = t_last


class QuadratureError(MtwistError):
    pass


class NonDegenerateViolation(MtwistError):
    def __init__(self, block: str, detail: str = ""):
        super().__init__(f"metric block {block} is degenerate {detail}".rstrip())
        self.block = block


class SignatureError(MtwistError):
    pass


class PreconditionError(MtwistError):
    pass


class WrongConnectionError(MtwistError):
    pass


class PositivityLoss(MtwistError):
    def __init__(self, t: float, value: float):
        super().__init__(f"warping function not positive at t={t!r} (value {value!r})")
        self.t = t
        self.value = value


class VariationLeavesTimelikeCone(MtwistError):
    pass


class DegenerateFundamentalTensor(MtwistError):
    pass


class SpecError(MtwistError):
    """Malformed specification document."""
