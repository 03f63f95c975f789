import sys

from dotenv import load_dotenv

from sdot.cli import cli

load_dotenv()

if __name__ == "__main__":
    sys.exit(cli())
