"""Exception hierarchy shared by every stage.

Anything derived from :class:`InputError` maps to CLI exit code 1 and
:class:`NumericalError` maps to exit code 2.
"""


class CoroskinError(Exception):
    pass


class InputError(CoroskinError, ValueError):
    """Bad input data, bad configuration or a violated precondition."""


class FormatError(InputError):
    pass


class ConfigError(InputError):
    pass


class StageInputError(InputError):
    """A pipeline stage was requested without the artifact it consumes."""

    def __init__(self, stage, artifact):
        self.stage = stage
        self.artifact = artifact
        super().__init__(f"stage '{stage}' needs the '{artifact}' artifact, which was not provided")


class MeshError(InputError):
    pass


class TopologyError(InputError):
    pass


class NumericalError(CoroskinError, ArithmeticError):
    """Singular systems, non-convergence and similar failures."""


class ConstraintViolation(CoroskinError):
    """Raised in strict mode when a generated sequence breaks a mechanical limit."""

    def __init__(self, violations):
        self.violations = list(violations)
        first = self.violations[0] if self.violations else None
        super().__init__(f"{len(self.violations)} constraint violation(s); first: {first}")
