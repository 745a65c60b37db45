"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the dispatcher never
needs a lookup table.
"""

from __future__ import annotations


class CtpBenchError(Exception):
    exit_code = 4


class ValidationError(CtpBenchError):
    exit_code = 3


class ExecutionError(CtpBenchError):
    exit_code = 4


# --- profiles ---------------------------------------------------------------

class UnknownProfile(ValidationError):
    pass


class UnknownParent(ValidationError):
    pass


class DuplicateProfile(ValidationError):
    pass


class CycleDetected(ValidationError):
    def __init__(self, path):
        self.path = list(path)
        super().__init__("profile composition cycle: " + " -> ".join(self.path))


class ParseError(ValidationError):
    def __init__(self, message, line, column, source="<profiles>"):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


# --- metrics ----------------------------------------------------------------

class NoOverlap(ValidationError):
    pass


class NonMonotoneCurve(ValidationError):
    def __init__(self, message, pair=None):
        self.pair = pair
        super().__init__(message)


class TooFewPoints(ValidationError):
    pass


class EmptyGroup(ValidationError):
    pass


# --- energy -----------------------------------------------------------------

class MeterUnavailable(ExecutionError):
    pass


class DecoderFailed(ExecutionError):
    def __init__(self, message, returncode=None, stderr=""):
        self.returncode = returncode
        self.stderr = stderr
        super().__init__(message)


class NonPositiveEnergy(ExecutionError):
    def __init__(self, sample):
        self.sample = sample
        super().__init__(
            f"decode energy {sample.e_dec:.6f} J is not positive "
            f"(total {sample.e_total:.6f} J, idle {sample.e_idle:.6f} J)"
        )


class Unconverged(CtpBenchError):
    exit_code = 5

    def __init__(self, series):
        self.series = series
        super().__init__(
            f"measurement did not converge after {series.n} valid samples "
            f"(relative half-width {series.relative_half_width:.4f} > beta {series.beta})"
        )


# --- orchestrator / report --------------------------------------------------

class PlanInvalid(ValidationError):
    pass


class EncoderFailed(ExecutionError):
    pass


class UnparseableLog(ExecutionError):
    def __init__(self, message, log_path=None):
        self.log_path = log_path
        if log_path is not None:
            message = f"{message} (log: {log_path})"
        super().__init__(message)


class MissingCell(ValidationError):
    pass


class IncompleteCurve(ValidationError):
    def __init__(self, sequence, profile, detail=""):
        self.sequence = sequence
        self.profile = profile
        msg = f"incomplete curve for sequence={sequence!r} profile={profile!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
