"""External interfaces - the command line."""

from .cli import main as cli_main

__all__ = ["cli_main"]
