"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AspectChainError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AspectChainError, ValueError):
    """A value violates a documented precondition or type invariant."""


class RenderError(AspectChainError):
    """A prompt could not be rendered from its inputs."""


class ParseFailure(AspectChainError):
    """Judge output could not be turned into the expected typed value."""


class LLMError(AspectChainError):
    """Base for judge/backend failures."""


class BackendUnavailable(LLMError):
    """Transient failures persisted past the retry budget."""


class RequestRejected(LLMError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body[:500]
        super().__init__(f"request rejected with status {status}: {self.body}")


class NoScriptMatch(LLMError):
    """The scripted backend has no rule for a request."""


class ReplayMiss(LLMError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no transcript record for request {digest}")


class StageOneFailure(AspectChainError):
    """Relevant-aspect generation produced nothing usable."""


class InstanceFailure(AspectChainError):
    """One instance could not be scored; it is excluded, the run continues."""


class EmptyKnowledgeError(AspectChainError):
    """No aspect is present in both the chain and the score set."""


class DatasetError(AspectChainError):
    """A dataset file or manifest is malformed."""


class ConfigError(AspectChainError):
    """Run configuration is invalid or unusable."""
