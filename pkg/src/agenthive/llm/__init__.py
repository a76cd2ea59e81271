"""Chat-completion backend: client, prompt templates, parsers and LLM agents."""

from .agent import LLMAgent, LLMReporter
from .client import API_KEY_ENV, ChatClient, EndpointConfig, complete
from .parsing import normalize_label, parse_agent_output, parse_debate_output, parse_role
from .prompts import Capability, PromptTemplate, load_templates

__all__ = [
    "API_KEY_ENV",
    "Capability",
    "ChatClient",
    "EndpointConfig",
    "LLMAgent",
    "LLMReporter",
    "PromptTemplate",
    "complete",
    "load_templates",
    "normalize_label",
    "parse_agent_output",
    "parse_debate_output",
    "parse_role",
]
