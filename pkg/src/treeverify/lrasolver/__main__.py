"""CLI entry point: read an SMT-LIB2 script from stdin or a file, print results."""

import argparse
import sys

from .smt import run_script


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m treeverify.lrasolver",
        description="Exact QF_LRA solver for SMT-LIB2 scripts",
    )
    parser.add_argument("script", nargs="?", help="script file (default: stdin)")
    parser.add_argument("-t", "--timeout-ms", type=int, default=None,
                        help="soft timeout per check-sat, in milliseconds")
    args = parser.parse_args(argv)
    if args.script:
        with open(args.script, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = sys.stdin.read()
    timeout = args.timeout_ms
    if timeout is not None and timeout <= 0:
        # a non-positive budget means "don't even try"
        sys.stdout.write("unknown\n")
        return 0
    sys.stdout.write(run_script(text, timeout))
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
