"""HTTP face of a desk: FastAPI app factory and its wire schemas."""

from .app import create_app

__all__ = ["create_app"]
