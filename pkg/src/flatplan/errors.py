"""Exception hierarchy shared by all flatplan modules."""


class FlatPlanError(Exception):
    """Base class for every error raised by flatplan."""


# measures
class NonincreasingViolation(FlatPlanError):
    pass


class MassError(FlatPlanError):
    pass


class LeftEndpointMismatch(FlatPlanError):
    pass


class DomainError(FlatPlanError):
    pass


# flatness
class SupportMismatch(FlatPlanError):
    pass


class RejectNotStepForm(FlatPlanError):
    def __init__(self, reasons):
        self.reasons = dict(reasons)
        text = "; ".join(f"item {k + 1}: {why}" for k, why in sorted(self.reasons.items()))
        super().__init__(f"not a step C-compatible tuple ({text})")


class NotInVNC(FlatPlanError):
    pass


# splits
class PreconditionFailed(FlatPlanError):
    pass


class HypothesisViolated(FlatPlanError):
    pass


class NumericalDegenerate(FlatPlanError):
    pass


class InvalidCertificate(FlatPlanError):
    """A split produced a certificate that fails its own verification."""


# planner
class AlignmentError(FlatPlanError):
    pass


class NoAlignment(FlatPlanError):
    pass


class Infeasible(FlatPlanError):
    pass


class SliceEmpty(Infeasible):
    pass


# oracle
class SizeExceeded(FlatPlanError):
    pass
