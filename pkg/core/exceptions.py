"""
Errors raised by the barrier apps.

Each error carries a human readable ``detail``, a short ``code`` printed by the
commands in front of the message, and a ``context`` dict with whatever
witness data explains the failure (states, singular values, reports).
"""


class BarrierError(Exception):
    default_detail = 'Barrier synthesis failed.'
    default_code = 'error'

    def __init__(self, detail=None, code=None, **context):
        self.detail = detail or self.default_detail
        self.code = code or self.default_code
        self.context = context
        super().__init__(self.detail)

    def __str__(self) -> str:
        return str(self.detail)


# ===== Differentiation =====
class NonFiniteValue(BarrierError):
    default_detail = 'Function produced a NaN or infinite value.'
    default_code = 'non_finite_value'


class DimensionMismatch(BarrierError, ValueError):
    default_detail = 'Array dimensions do not match.'
    default_code = 'dimension_mismatch'


# ===== Systems =====
class SingularInertia(BarrierError):
    default_detail = 'Inertia matrix is numerically singular.'
    default_code = 'singular_inertia'


# ===== Synthesis =====
class InvalidRegion(BarrierError, ValueError):
    default_detail = 'Point lies outside the region where the universal formula is smooth.'
    default_code = 'invalid_region'


class GradientConditionViolated(BarrierError):
    default_detail = 'Constraint gradient vanishes outside the interior of the constraint set.'
    default_code = 'gradient'


class GainTooSmall(BarrierError, ValueError):
    default_detail = 'Backstepping gain is below the admissible minimum.'
    default_code = 'gains'


class RankDeficientOnC(BarrierError):
    default_detail = 'Decoupling matrix loses rank inside the constraint set.'
    default_code = 'rank'


# ===== Filtering =====
class RankDeficientAtState(BarrierError):
    default_detail = 'Decoupling matrix is rank deficient at this state.'
    default_code = 'rank_at_state'


class InfeasibleAtState(BarrierError):
    default_detail = 'Barrier condition cannot be met at this state.'
    default_code = 'infeasible'


# ===== Simulation =====
class InitialStateUnsafe(BarrierError):
    default_detail = 'Initial state lies outside the safe set.'
    default_code = 'initial_state'


class NonFiniteState(BarrierError):
    default_detail = 'Integration produced a non-finite state.'
    default_code = 'non_finite_state'


# ===== Scenarios =====
class ScenarioConfigError(BarrierError):
    default_detail = 'Scenario configuration is invalid.'
    default_code = 'config'
