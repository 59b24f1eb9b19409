"""Console entry point.

Run directly:        python -m src.main run --config run.toml
Installed script:    stokes-continuation run --config run.toml
"""

import sys

from src.cli.app import main as cli_main


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
