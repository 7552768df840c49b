"""Agent layer: prompts, backends, parsing, symbolic fallbacks and the pipeline."""

from .agents import FALLBACK_TAG, decide, log_agent_assess, metrics_agent_detect
from .backend import (
    AgentPrompt,
    AuthenticationError,
    Backend,
    BackendConfig,
    BackendError,
    BackendTimeoutError,
    HTTPBackend,
    MissingAPIKeyError,
    TransportExhaustedError,
    backend_complete,
)
from .mocks import GarbageBackend, NoisyBackend, OracleBackend, ScriptedBackend
from .parsing import ParseError
from .pipeline import CriticSession, DetectionPipeline, PipelineTrace

__all__ = [
    "AgentPrompt", "AuthenticationError", "Backend", "BackendConfig", "BackendError",
    "BackendTimeoutError", "CriticSession", "DetectionPipeline", "FALLBACK_TAG", "GarbageBackend",
    "HTTPBackend", "MissingAPIKeyError", "NoisyBackend", "OracleBackend", "ParseError",
    "PipelineTrace", "ScriptedBackend", "TransportExhaustedError", "backend_complete", "decide",
    "log_agent_assess", "metrics_agent_detect",
]
