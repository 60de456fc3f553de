"""HTTP model adapter for the groundsight wire protocol."""

__version__ = "0.1.0"

from .config import AdapterConfig, AdapterError, all_stub_config
from .models import (
    StubEmbedder,
    StubJudge,
    StubLocalizer,
    StubVLM,
    build_model,
    register_factory,
)

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "all_stub_config",
    "StubEmbedder",
    "StubJudge",
    "StubLocalizer",
    "StubVLM",
    "build_model",
    "register_factory",
    "create_app",
    "serve",
    "__version__",
]


def __getattr__(name):
    # service pulls in fastapi; keep model/config imports light
    if name in ("create_app", "serve"):
        from . import service

        return getattr(service, name)
    raise AttributeError(name)
