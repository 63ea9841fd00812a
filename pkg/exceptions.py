"""
Error taxonomy for the nacdyn pipeline.

Input errors map to CLI exit code 1, numeric failures to exit code 2.
"""
from typing import Optional, Sequence


class NacdynError(Exception):
    """Base class for all pipeline errors"""

    exit_code = 1


class InputError(NacdynError, ValueError):
    """Malformed or inconsistent input"""

    exit_code = 1


class ParseError(InputError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class IndexRangeError(InputError):
    pass


class DimensionError(InputError):
    pass


class ArityError(InputError):
    pass


class CapacityError(InputError):
    pass


class FormatError(InputError):
    pass


class ExtrapolationError(InputError):
    pass


class ConfigError(InputError):
    pass


class AlignmentError(InputError):
    def __init__(self, message: str, offenders: Sequence = ()):
        self.offenders = list(offenders)
        if self.offenders:
            shown = ", ".join(str(o) for o in self.offenders[:10])
            more = "" if len(self.offenders) <= 10 else f" (+{len(self.offenders) - 10} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class MissingArtifactError(InputError):
    def __init__(self, message: str, tag=None):
        self.tag = tag
        if tag is not None:
            message = f"{message} [geometry {tag}]"
        super().__init__(message)


class NumericError(NacdynError, ArithmeticError):
    """Numerical failure during a computation"""

    exit_code = 2


class DegenerateGapError(NumericError):
    def __init__(self, gap: float, floor: float, tag=None):
        self.gap = gap
        self.floor = floor
        self.tag = tag
        where = "" if tag is None else f" at geometry {tag}"
        super().__init__(f"energy gap {gap:.3e} below floor {floor:.1e}{where}")


class EmptyFieldError(NumericError):
    pass


class EigensolverError(NumericError):
    def __init__(self, message: str, residual: float = float("nan")):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class InstabilityError(NumericError):
    def __init__(self, step: int, stability_estimate: float, dt: float):
        self.step = step
        self.stability_estimate = stability_estimate
        self.dt = dt
        super().__init__(
            f"non-finite amplitudes at step {step}; dt={dt:.4g} a.u., "
            f"spectral estimate {stability_estimate:.4g} hartree (bound dt < {1.0 / stability_estimate:.4g})"
        )
