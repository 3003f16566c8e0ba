"""Typed errors raised by PromptEvo.

Every class carries ``exit_code``, the process status the CLI returns when the
error reaches the top level.
"""

from typing import Optional


class PromptEvoError(Exception):
    exit_code = 1


# ---------------------------------------------------------------------------
# Configuration and prompt shape (exit 2)
# ---------------------------------------------------------------------------
class ConfigInvalid(PromptEvoError):
    exit_code = 2


class ZeroPlaceholders(ConfigInvalid):
    pass


class MultiplePlaceholders(ConfigInvalid):
    pass


class EmptyPrompt(ConfigInvalid):
    pass


class PlaceholderNotFinal(ConfigInvalid):
    pass


class WouldEmptyPrompt(ConfigInvalid):
    pass


class PlaceholderTargeted(ConfigInvalid):
    pass


class InvalidPosition(ConfigInvalid):
    pass


class UnknownCondition(ConfigInvalid):
    pass


class InvalidGenerationParams(ConfigInvalid):
    pass


# ---------------------------------------------------------------------------
# Model backends
# ---------------------------------------------------------------------------
class BackendError(PromptEvoError):
    pass


class BackendUnreachable(BackendError):
    exit_code = 3


class MalformedResponse(BackendError):
    pass


class NoMaskInRequest(BackendError):
    pass


class EmptyGeneration(BackendError):
    pass


class UnknownLabelFromServer(BackendError):
    pass


class ProposerError(PromptEvoError):
    pass


class ProposerUnavailable(ProposerError):
    pass


class ProposerEmpty(ProposerError):
    pass


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------
class MetricsError(PromptEvoError, ValueError):
    pass


class EmptyText(MetricsError):
    pass


class LengthMismatch(MetricsError):
    pass


class UnknownLabel(MetricsError):
    pass


# ---------------------------------------------------------------------------
# Search and run logs
# ---------------------------------------------------------------------------
class OptimizerError(PromptEvoError):
    pass


class EmptyPool(OptimizerError):
    pass


class OracleError(PromptEvoError):
    pass


class NeighborhoodTooLarge(OracleError):
    pass


class RunLogError(PromptEvoError):
    pass


class CorruptLog(RunLogError):
    pass


class LineageMismatch(RunLogError):
    pass


# Errors a server may signal in a 4xx body as {"error": <name>, "detail": ...}.
_WIRE_ERRORS = {
    cls.__name__: cls
    for cls in (
        NoMaskInRequest,
        EmptyGeneration,
        UnknownLabelFromServer,
        MalformedResponse,
    )
}


def parse_error(status_code: int, payload: Optional[dict]) -> BackendError:
    """Map a non-2xx wire reply to the matching typed error."""
    name = None
    detail = ""
    if isinstance(payload, dict):
        name = payload.get("error")
        detail = str(payload.get("detail", ""))
    cls = _WIRE_ERRORS.get(name, BackendError)
    message = f"HTTP {status_code}"
    if name:
        message += f" {name}"
    if detail:
        message += f": {detail}"
    return cls(message)
