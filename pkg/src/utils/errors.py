"""Exception types raised by library code (the CLI turns them into colored errors)"""


class TaskchunkError(ValueError):
    """Base class for every error raised inside the package."""


class ContractViolation(TaskchunkError):
    """A shape, size or call-order precondition was broken by the caller."""


class NumericalError(TaskchunkError):
    """A NaN or Inf appeared where a finite value is required."""


class FormatError(TaskchunkError):
    """A demo file or checkpoint container is malformed, truncated or corrupted."""


class ConfigError(TaskchunkError):
    """One or more configuration problems, reported together."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        if len(self.problems) == 1:
            message = self.problems[0]
        else:
            message = "Invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(message)


class GenerationError(TaskchunkError):
    """The scripted expert could not produce a successful demonstration."""


class TokenizerFitError(TaskchunkError):
    """An action tokenizer (k-means or residual VQ) could not be fitted."""


class StateError(TaskchunkError):
    """An object was used before it reached the required state (e.g. unfitted codebook)."""


class TaskLookupError(TaskchunkError, LookupError):
    """A task id does not exist in the suite or embedding table."""


class LoadError(TaskchunkError):
    """A checkpoint does not match the configuration or suite it is loaded against."""


class ReportError(TaskchunkError):
    """Metrics files are missing or malformed."""


class PrerequisiteError(TaskchunkError):
    """A command needs an artifact that another command produces."""

    def __init__(self, message, command):
        self.command = command
        super().__init__(f"{message} (run {command} first)")


class TrainingAborted(TaskchunkError):
    """Training hit a non-finite loss."""

    def __init__(self, step, batch_seed, loss):
        self.step = step
        self.batch_seed = batch_seed
        self.loss = loss
        super().__init__(
            f"Non-finite loss {loss} at step {step} (batch stream seed={batch_seed[0]}, keys={batch_seed[1:]})"
        )
