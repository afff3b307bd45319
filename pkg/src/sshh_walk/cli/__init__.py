"""Command-line interface for sshh-walk."""

from .main import main

__all__ = ["main"]
