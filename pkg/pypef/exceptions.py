"""All pypef exceptions."""

class PEFException(Exception):
    """A base class for all pypef exceptions."""

class PEFParameterException(PEFException):
    """A numeric parameter is outside the range an operation accepts."""

class PEFDomainException(PEFException):
    """An input lies outside the domain of the requested operation.

    Raised, for example, when a local behaviour is handed to the nonlocal
    decomposition or a signalling behaviour is used as an attack target.
    """

class PEFInputException(PEFException):
    """A behaviour, PEF or trial file could not be used.

    Args:
        message (str): Description of the problem.
        path (str): The offending file, if any. Defaults to None.
        line (int): The 1-based line (or trial) number, if known. Defaults to None.

    Attributes:
        message (str): Description of the problem.
        path (str): The offending file, if any.
        line (int): The 1-based line (or trial) number, if known.
    """

    def __init__(self, message, path=None, line=None): #pylint: disable=super-init-not-called
        self.message = message
        self.path = path
        self.line = line

    def __str__(self):
        where = ''
        if self.path is not None:
            where = f" ({self.path}"
            where += f", line {self.line})" if self.line is not None else ")"
        elif self.line is not None:
            where = f" (line {self.line})"

        return f"{self.message}{where}"

class PEFResourceException(PEFException):
    """An enumeration would exceed the configured size limit.

    Args:
        requested (int): The number of items the enumeration would produce.
        limit (int): The largest enumeration permitted.

    Attributes:
        requested (int): The number of items the enumeration would produce.
        limit (int): The largest enumeration permitted.
    """

    def __init__(self, requested, limit): #pylint: disable=super-init-not-called
        self.requested = requested
        self.limit = limit

    def __str__(self):
        return f"Enumeration of {self.requested} items exceeds the limit of {self.limit}."

class PEFSolverException(PEFException):
    """A numerical solver failed to produce a trustworthy answer.

    Args:
        message (str): Description of the failure.
        status (str): The solver status at termination.
        best (object): The best iterate found before giving up. Defaults to None.

    Attributes:
        message (str): Description of the failure.
        status (str): The solver status at termination.
        best (object): The best iterate found before giving up, if any.
    """

    def __init__(self, message, status, best=None): #pylint: disable=super-init-not-called
        self.message = message
        self.status = status
        self.best = best

    def __str__(self):
        return f"{self.message} [status: {self.status}]"

class PEFVerificationException(PEFException):
    """A mathematical property that must hold was found violated.

    Args:
        message (str): Description of the violated property.
        report (dict): Details of the failed check. Defaults to None.

    Attributes:
        message (str): Description of the violated property.
        report (dict): Details of the failed check.
    """

    def __init__(self, message, report=None): #pylint: disable=super-init-not-called
        self.message = message
        self.report = report if report is not None else {}

    def __str__(self):
        return self.message
