"""Exception hierarchy.  The CLI maps HegemonError subclasses to exit codes."""


class HegemonError(Exception):
    exit_code = 1


class ConfigError(HegemonError, ValueError):
    """Bad configuration, world document or input data."""


class DomainError(HegemonError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class ContractError(HegemonError, ValueError):
    """A caller violated an operation's precondition."""


class OracleBoundExceeded(HegemonError):
    """Instance too large for exhaustive enumeration."""


class InvariantViolation(HegemonError, AssertionError):
    """An internal consistency check failed; indicates a bug."""

    exit_code = 2
