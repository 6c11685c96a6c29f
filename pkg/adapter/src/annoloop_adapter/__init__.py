"""Backend server speaking the annoloop wire protocol with real or stub models."""

from .service import create_app, serve_backend
from .stub import StubModels

__all__ = ["create_app", "serve_backend", "StubModels"]
