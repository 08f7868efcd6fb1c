"""Exception hierarchy.

Errors are grouped by the CLI exit code they map to: configuration problems
exit with 1, numerical failures with 2, file-system problems with 3.
"""


class AdiabaticityError(Exception):
    exit_code = 2


class ConfigError(AdiabaticityError):
    exit_code = 1


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(AdiabaticityError):
    exit_code = 2


class NonHermitianInput(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class DimensionMismatch(NumericalError):
    pass


class NearDegeneracy(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass


class MonomerCollision(NumericalError):
    pass


class SurfaceOutOfRange(NumericalError):
    pass


class ThermalSamplingFailure(NumericalError):
    pass


class PremiseViolation(NumericalError):
    pass


class GaugeInconsistency(NumericalError):
    pass


class OutputError(AdiabaticityError):
    exit_code = 3


class DegenerateGaugeAmbiguity(UserWarning):
    """Eigenvector phases are ill defined inside a degenerate subspace."""
