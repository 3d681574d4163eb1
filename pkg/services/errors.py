# services/errors.py
import logging
import warnings

logger = logging.getLogger("LelongLab")


class LelongError(ValueError):
    """Gốc chung cho mọi lỗi đầu vào / tiền điều kiện của lelonglab."""


# ------------------- polytope -------------------
class InvalidVertex(LelongError):
    """Generator with a negative or non-finite coordinate."""


class DimensionMismatch(LelongError):
    pass


class NotInPolytope(LelongError):
    """Exponent (tropical slope, Newton exponent, neighbourhood corner) outside S."""


class NotNested(LelongError):
    pass


# ------------------- logsupport -------------------
class ZeroCoordinate(LelongError):
    """hs_interior called on a point of a coordinate hyperplane."""


class NotLowerSet(LelongError):
    pass


class IsLowerSet(LelongError):
    pass


# ------------------- regularize -------------------
class BadParameters(LelongError):
    pass


class NonFiniteObjective(LelongError):
    pass


class DeltaTooLarge(LelongError):
    pass


class GlueMismatch(LelongError):
    """Smoothed branch is not below H_S - C on the boundary of the gluing polydisc."""


class NotDecreasing(LelongError):
    pass


class NeverBelow(LelongError):
    pass


# ------------------- diagnostics / io -------------------
class StencilHitsSingularity(LelongError):
    pass


class SchemaError(LelongError):
    """Fixture JSON does not match the expected schema."""


class QuadratureUnderflow(UserWarning):
    """Quadrature met node values below the clamp floor; the value is still returned."""


def flag_underflow(message: str) -> None:
    logger.warning(f"⚠️ {message}")
    warnings.warn(message, QuadratureUnderflow, stacklevel=3)
