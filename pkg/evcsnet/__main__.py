"""Entry point for ``python -m evcsnet`` and the ``evcsnet`` console script."""
import sys
from typing import Optional, Sequence

import click

from evcsnet.cli.main import cli


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI and return its exit code.

    Usage errors exit with 2; commands that hit a solver limit still exit
    with their own code through ``sys.exit``.
    """
    try:
        result = cli.main(args=list(argv) if argv is not None else None,
                          prog_name="evcsnet", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
