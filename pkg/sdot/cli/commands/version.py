import argparse

from sdot import __version__
from sdot.core.config import Settings


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("version", help="Print the semantic version")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, settings: Settings) -> int:
    print(f"sdot {__version__}")
    return 0
