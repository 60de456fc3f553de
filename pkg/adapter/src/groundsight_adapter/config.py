"""Service configuration.

An endpoint is enabled by giving it a model identifier; endpoints left as
None stay disabled and answer with a not_configured error object. Model
identifiers are resolved by the registry in models.py ("stub",
"stub:<fixed text>", or any key a deployment registers).
"""

from __future__ import annotations

from dataclasses import dataclass


class AdapterError(Exception):
    pass


ENDPOINTS = ("answer", "summarize", "localize", "embed", "judge")


@dataclass(frozen=True)
class AdapterConfig:
    answer_model: str | None = None
    summarize_model: str | None = None
    localize_model: str | None = None
    embed_model: str | None = None
    judge_model: str | None = None
    device: str = "cpu"
    max_concurrent: int = 4
    port: int = 8080
    embed_dim: int = 64
    # None disables per-request timeouts
    request_timeout: float | None = 30.0

    def __post_init__(self):
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if not (0 < self.port < 65536):
            raise ValueError(f"port out of range: {self.port}")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.request_timeout is not None and self.request_timeout <= 0:
            raise ValueError("request_timeout must be positive or None")
        if not self.device:
            raise ValueError("device must be non-empty")

    def model_for(self, endpoint: str) -> str | None:
        if endpoint not in ENDPOINTS:
            raise AdapterError(f"unknown endpoint {endpoint!r}")
        return getattr(self, f"{endpoint}_model")

    def enabled_endpoints(self) -> dict[str, bool]:
        return {name: self.model_for(name) is not None for name in ENDPOINTS}


def all_stub_config(**overrides) -> AdapterConfig:
    """Every endpoint served by its deterministic stub; handy for tests."""
    fields = dict(
        answer_model="stub",
        summarize_model="stub",
        localize_model="stub",
        embed_model="stub",
        judge_model="stub",
    )
    fields.update(overrides)
    return AdapterConfig(**fields)
