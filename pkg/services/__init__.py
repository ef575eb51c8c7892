"""Services package for the numerical work."""

from .run_service import execute, run

__all__ = ["execute", "run"]
