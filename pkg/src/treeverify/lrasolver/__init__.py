"""Bundled QF_LRA solver, runnable as ``python -m treeverify.lrasolver``.

Used as the default backend when no external SMT solver (z3, cvc5, ...) is on
PATH. It speaks enough SMT-LIB2 for the scripts this package emits and prints
``sat``/``unsat``/``unknown`` plus get-value S-expressions on stdout.
"""

from .smt import Session, run_script

__all__ = ["Session", "run_script"]
