"""Exception taxonomy shared across the package.

``InputError`` subclasses signal bad user input (CLI exit code 2);
``ComputationError`` subclasses signal failures while evaluating an
otherwise valid request (CLI exit code 3).  Check failures are reported
through return values, not exceptions.
"""


class ConfcurvError(Exception):
    pass


class InputError(ConfcurvError):
    pass


class ComputationError(ConfcurvError):
    pass


# --- expression / metric layer -------------------------------------------

class ExprSyntaxError(InputError):
    def __init__(self, message, line=1, column=0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownIdentifier(InputError):
    pass


class WrongArity(InputError):
    pass


class VariableOutOfRange(InputError):
    pass


class DomainError(InputError):
    pass


class NotSPD(ComputationError):
    pass


class EvalError(ComputationError):
    pass


# --- tensor layer ----------------------------------------------------------

class InsufficientJetOrder(InputError):
    pass


class DimensionTooSmall(InputError):
    pass


class UnsupportedDimension(InputError):
    pass


class VarianceMismatch(InputError):
    pass


class DegenerateGradient(ComputationError):
    pass


# --- symbol layer ----------------------------------------------------------

class ZeroCovector(InputError):
    pass


class NonTraceFreePerturbation(InputError):
    pass


class NotUnimodular(InputError):
    pass


class ExtrapolationDiverged(ComputationError):
    pass


# --- solver ----------------------------------------------------------------

class NonFiniteEnergy(ComputationError):
    pass


class LineSearchFailed(ComputationError):
    pass


class NotDiffeomorphic(ComputationError):
    pass


# --- smoothing -------------------------------------------------------------

class BadRegularity(InputError):
    pass


class PartitionCoverage(InputError):
    pass


class DegenerateFit(ComputationError):
    pass


class NoEllipticityBand(ComputationError):
    pass


class SingularNormalMatrix(ComputationError):
    pass
