"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class VistaError(Exception):
    """Base class for all engine errors."""


class ConfigError(VistaError):
    """A config file or flag set is invalid (unknown key, bad value)."""


# --- template registry ------------------------------------------------------


class UnknownTemplate(VistaError):
    def __init__(self, name: str):
        super().__init__(f"unknown template: {name!r}")
        self.name = name


class UnboundPlaceholder(VistaError):
    def __init__(self, placeholder: str, template: str):
        super().__init__(
            f"template {template!r} has no binding for placeholder {placeholder!r}"
        )
        self.placeholder = placeholder
        self.template = template


# --- backend gateway --------------------------------------------------------


class BackendUnavailable(VistaError):
    """The model backend could not be reached after retries."""

    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class MalformedResponse(VistaError):
    """A model response lacked the expected structured block after repair and retries."""

    def __init__(self, template: str, detail: str = ""):
        msg = f"malformed response for template {template!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.template = template
        self.detail = detail


class ReplayMiss(VistaError):
    def __init__(self, fingerprint: str, template: str):
        super().__init__(
            f"no transcript record for fingerprint {fingerprint} (template {template!r})"
        )
        self.fingerprint = fingerprint
        self.template = template


class GenerationRejected(VistaError):
    """The video backend refused a prompt; the candidate is skipped."""

    def __init__(self, prompt_id: str, reason: str = ""):
        super().__init__(f"generation rejected for prompt {prompt_id}: {reason or 'unspecified'}")
        self.prompt_id = prompt_id
        self.reason = reason


# --- storage ----------------------------------------------------------------


class StorageFailure(VistaError):
    pass


class CorruptTranscript(VistaError):
    pass


class CorruptTrajectory(VistaError):
    pass


# --- run lifecycle ----------------------------------------------------------


class FatalBackend(VistaError):
    """Neither planned nor residual generation could produce any candidate."""


class AlreadyCompleted(VistaError):
    pass


class NoSuchIteration(VistaError):
    def __init__(self, index: int, available: int):
        super().__init__(f"no iteration {index}; run has {available} record(s)")
        self.index = index
        self.available = available


class MismatchedCorpus(VistaError):
    pass


# --- scoring / aggregation --------------------------------------------------


class InvalidDelta(VistaError):
    def __init__(self, criterion: str, value: object):
        super().__init__(f"delta for {criterion!r} must be 0, 0.5 or 1, got {value!r}")
        self.criterion = criterion
        self.value = value


class MissingCriterion(VistaError):
    def __init__(self, detail: str):
        super().__init__(detail)
