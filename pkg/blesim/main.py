import logging
import sys
from typing import Optional, Sequence

import click

from blesim import montecarlo, storage
from blesim.cli import Invocation, parse_args
from blesim.skip import trace_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISMATCH = 2
EXIT_IO = 3


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def attach_trace(path) -> logging.Handler:
    handler = logging.FileHandler(path, mode="w")
    handler.setFormatter(logging.Formatter("%(message)s"))
    trace_logger.addHandler(handler)
    trace_logger.setLevel(logging.DEBUG)
    trace_logger.propagate = False
    return handler


def detach_trace(handler: logging.Handler) -> None:
    trace_logger.removeHandler(handler)
    trace_logger.setLevel(logging.NOTSET)
    trace_logger.propagate = True
    handler.close()


def execute(invocation: Invocation) -> int:
    """Exit code of one sweep; failures other than I/O propagate with their traceback."""
    handler = None
    try:
        if invocation.trace_path is not None:
            handler = attach_trace(invocation.trace_path)
        result = montecarlo.run_sweep(invocation.experiment, invocation.workers)
        storage.emit_results(
            result.rows, result.sweep, invocation.out_dir, invocation.experiment
        )
    except storage.StorageError as e:
        logger.error(e.message)
        return EXIT_IO
    except OSError as e:
        logger.error("%s: %s", e.filename, e.strerror)
        return EXIT_IO
    finally:
        if handler is not None:
            detach_trace(handler)

    if result.mismatches:
        logger.error("%d scenarios diverged between the engines", len(result.mismatches))
        return EXIT_MISMATCH
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        invocation = parse_args(sys.argv[1:] if argv is None else argv)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    configure_logging(invocation.verbose)
    return execute(invocation)


if __name__ == "__main__":
    sys.exit(main())
