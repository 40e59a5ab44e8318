"""Process entry point mapping errors to exit codes"""

import logging
import sys

import click

from pwave_volume.cli.app import cli
from pwave_volume.errors import (
    ConfigError,
    DomainError,
    NumericalError,
    UnsupportedError,
)

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64


def run(argv=None):
    """
    Run the command line

    :param argv: arguments without the program name (default sys.argv[1:])

    :returns: exit code, 0 on success, 1 on domain errors, 2 on numerical
              failures, 64 on usage and configuration errors
    """
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        code = cli.main(args=args, prog_name="pwave-volume", standalone_mode=False)
    except click.UsageError as err:
        err.show()
        return EXIT_USAGE
    except click.ClickException as err:
        err.show()
        return err.exit_code
    except ConfigError as err:
        key = f" ({err.key})" if err.key else ""
        click.echo(f"configuration error{key}: {err}", err=True)
        return EXIT_USAGE
    except (DomainError, UnsupportedError) as err:
        click.echo(f"error: {err}", err=True)
        return EXIT_DOMAIN
    except NumericalError as err:
        click.echo(f"numerical failure: {err}", err=True)
        return EXIT_NUMERICAL
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_DOMAIN
    return code if isinstance(code, int) else EXIT_OK
