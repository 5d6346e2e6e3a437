"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class VCLTError(Exception):
    exit_code = 1
    kind = "error"


class ParameterError(VCLTError, ValueError):
    exit_code = 1
    kind = "usage"


class FormatError(VCLTError, ValueError):
    exit_code = 2
    kind = "format"

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class InvariantError(VCLTError, ValueError):
    exit_code = 3
    kind = "invariant"


class DataCoverageError(InvariantError):
    pass


class EvaluationError(InvariantError):
    pass


class NumericError(VCLTError, ArithmeticError):
    exit_code = 4
    kind = "numeric"
