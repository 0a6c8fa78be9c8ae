"""Command-line interface."""

from .commands import run, main, build_parser, EXIT_OK, EXIT_BAD_INPUT, EXIT_NUMERIC

__all__ = ['run', 'main', 'build_parser', 'EXIT_OK', 'EXIT_BAD_INPUT', 'EXIT_NUMERIC']
