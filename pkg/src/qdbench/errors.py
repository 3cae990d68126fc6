"""Exception types shared across the package.

Callers distinguish two failure families: misuse of the API (bad arguments,
unknown ids, malformed specs) and faults raised while evaluating or talking to
an evaluator process. The CLI maps them to exit codes 1 and 2 respectively.
"""


class UsageError(ValueError):
    """The caller supplied invalid arguments or an inconsistent configuration."""


class EvaluationFault(RuntimeError):
    """An evaluator produced unusable output (non-finite values, crash, timeout)."""


class ProtocolError(EvaluationFault):
    """An external evaluator violated the qdo-eval/1 wire protocol."""
