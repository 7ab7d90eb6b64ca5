"""FastAPI service exposing the selection engine over HTTP."""

from .app import create_app

__all__ = ["create_app"]
