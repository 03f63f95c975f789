import sys

from sdot.cli import cli

sys.exit(cli())
