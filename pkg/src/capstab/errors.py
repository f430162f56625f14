"""Exception hierarchy.

Every error carries the tag of the module that raised it and the process exit
code the command line front end maps it to.
"""


class CapstabError(Exception):
    module = "capstab"
    exit_code = 3

    def __init__(self, message="", module=None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class ConfigError(CapstabError, ValueError):
    module = "cli"
    exit_code = 2


class ArgumentError(CapstabError, ValueError):
    exit_code = 2

    def __init__(self, message, module="capstab"):
        super().__init__(message, module)


class DomainError(CapstabError, ValueError):
    module = "spaceform"
    exit_code = 2


class ConstructionError(CapstabError, ValueError):
    module = "surface"
    exit_code = 2


class MeshQualityError(CapstabError):
    module = "surface"
    exit_code = 2


class ContactAngleError(CapstabError):
    """Contact angle too close to 0 or pi; the Robin coefficient blows up."""

    module = "surface"
    exit_code = 2


class TopologyError(CapstabError):
    module = "topology"
    exit_code = 2


class DependencyError(CapstabError):
    module = "discretize"


class NumericalError(CapstabError):
    module = "spectrum"

    def __init__(self, message, residual=None, module=None):
        super().__init__(message, module)
        self.residual = residual


class DegenerateConstraintError(CapstabError):
    module = "spectrum"


class PreconditionError(CapstabError):
    module = "identities"
    exit_code = 2


class FlowError(CapstabError):
    module = "identities"


class NotApplicableError(CapstabError):
    module = "topology"
    exit_code = 2
