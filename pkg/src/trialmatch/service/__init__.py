"""HTTP service for the human review workflows (labels, consensus, outreach)."""

from .app import create_app

__all__ = ["create_app"]
