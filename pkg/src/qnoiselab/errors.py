"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class QNoiseLabError(Exception):
    exit_code = 1


class InvalidArgumentError(QNoiseLabError, ValueError):
    exit_code = 2


class SizeLimitError(QNoiseLabError):
    """An enumeration or dimension cap would be exceeded."""

    exit_code = 3


class DegenerateInputError(QNoiseLabError, ValueError):
    """Input is well-formed but the requested statistic is undefined (e.g. zero variance)."""

    exit_code = 2


class NumericalContractError(QNoiseLabError):
    """A numerical invariant was broken, e.g. a probability below -1e-12."""

    exit_code = 4


class NotFoundError(QNoiseLabError, FileNotFoundError):
    exit_code = 1
