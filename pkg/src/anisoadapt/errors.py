"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line driver:
2 for I/O and file-format problems, 3 for invalid input, 4 for numerical
failure and 5 for the external mesher.
"""


class AnisoError(Exception):
    exit_code = 1


class InputError(AnisoError, ValueError):
    exit_code = 3


class NumericalError(AnisoError, ArithmeticError):
    exit_code = 4


class FormatError(AnisoError, OSError):
    exit_code = 2


class ParseError(FormatError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class SizeMismatch(FormatError):
    pass


class TopologyError(InputError):
    pass


class DegenerateElement(InputError):
    def __init__(self, message, element_id=None):
        self.element_id = element_id
        super().__init__(message)


class NotSpd(InputError):
    pass


class GridMismatch(InputError):
    pass


class UnsupportedGeometry(InputError):
    pass


class EmptyDirichlet(InputError):
    pass


class ConfigError(InputError):
    pass


class SingularFit(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class RefinementStall(NumericalError):
    pass


class ExternalFailure(AnisoError):
    exit_code = 5

    def __init__(self, message, stdout="", stderr="", returncode=None):
        self.stdout = stdout
        self.stderr = stderr
        self.returncode = returncode
        super().__init__(message)


class MissingOutput(ExternalFailure):
    pass


class NormalizationUnattainable(UserWarning):
    """The alpha_h equation has no root in the bisection bracket; identity metric used."""
