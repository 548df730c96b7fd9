"""Exception hierarchy shared by all modules."""


class MphsError(Exception):
    """Base class for all library errors."""


class StructureError(MphsError):
    """A port-Hamiltonian structure check failed.

    ``check`` names the violated property (``"skew"``, ``"psd"``,
    ``"dims"``, ``"gradient"``, ``"consistency"``, ...).
    """

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class NonConvergence(MphsError):
    def __init__(self, residual, iterations, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(
            f"Newton did not converge{where} after {iterations} iterations "
            f"(residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations
        self.step = step


class SingularFlowMap(MphsError):
    """The linearized implicit step system is rank deficient."""


class StepError(MphsError):
    """Wraps an error raised while integrating, with the failing step index."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


class PortMismatch(MphsError):
    pass


class UnsupportedBoundary(MphsError):
    pass


class UnsupportedDomain(MphsError):
    pass


class PeriodicBoundary(MphsError):
    pass


class SingularSystem(MphsError):
    pass


class ZeroConductivity(MphsError):
    pass


class EmptyRegion(MphsError):
    pass


class NonPositiveJacobianDet(MphsError):
    def __init__(self, message="det(F) <= 0", cell=None):
        if cell is not None:
            message = f"{message} (cell {cell})"
        super().__init__(message)
        self.cell = cell


class NonPositiveTemperature(MphsError):
    def __init__(self, message="temperature <= 0", cell=None):
        if cell is not None:
            message = f"{message} (cell {cell})"
        super().__init__(message)
        self.cell = cell


class SingularMass(MphsError):
    pass


class IllPosedBC(MphsError):
    pass


class SingularNetwork(MphsError):
    pass


class SingularCircuit(MphsError):
    pass


class ZeroSlip(MphsError):
    pass


class NegativeLoss(MphsError):
    pass


class AsymmetricInductance(MphsError):
    pass


class UnstableSystem(MphsError):
    pass


class NonMinimalWarning(UserWarning):
    """Hankel singular values have a near-zero tail."""


class EmptySnapshots(MphsError):
    pass


class NotSPD(MphsError):
    pass


class NoFeasibleModel(MphsError):
    pass


class SingularF(MphsError):
    pass


class ConfigError(MphsError):
    """Scenario or input file failed validation."""
