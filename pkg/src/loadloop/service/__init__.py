"""HTTP service wrapping the pipeline."""

from .app import create_app  # noqa: F401
