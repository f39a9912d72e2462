"""Event-level video comprehension: deterministic event localization plus an
LLM agent loop for video question answering and dense captioning."""

__version__ = "0.1.0"
