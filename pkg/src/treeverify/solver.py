"""Drive an external SMT solver process and parse its verdict and model.

The solver is any command that reads SMT-LIB2 (stdin by default, or a file
when the command template contains ``{file}``), prints ``sat``/``unsat``/
``unknown`` and answers ``get-value`` with S-expressions. A soft timeout is
substituted for ``{timeout_ms}`` in the template; a hard kill of the process
group after timeout + 2 s guarantees progress even against non-cooperative
solvers. One fresh process per query: no incremental sessions, so parallel
workers and timeout recovery stay trivial.

Solver resolution order: explicit argument, the TREEVERIFY_SOLVER_CMD
environment variable, ``z3`` if on PATH, else the bundled QF_LRA solver.
"""

from __future__ import annotations

import math
import os
import shlex
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .encode import EncodingContext, SmtScript
from .errors import ProtocolError, SolverUnavailable
from .model import BOOL, Instance
from .question import VerificationTask

#: Grace period between the soft timeout and the hard process kill.
GRACE_SECONDS = 2.0

ENV_SOLVER_CMD = "TREEVERIFY_SOLVER_CMD"

Z3_TEMPLATE = "z3 -in -t:{timeout_ms}"


def bundled_solver_template() -> str:
    return f"{shlex.quote(sys.executable)} -m treeverify.lrasolver --timeout-ms {{timeout_ms}}"


def default_solver_cmd() -> str:
    env = os.environ.get(ENV_SOLVER_CMD)
    if env:
        return env
    if shutil.which("z3"):
        return Z3_TEMPLATE
    return bundled_solver_template()


@dataclass
class SolverVerdict:
    status: str  # "sat" | "unsat" | "unknown"
    model: Optional[dict] = None  # name -> Fraction | bool, present iff sat
    wall_time: float = 0.0
    diagnostics: str = ""


# ---------------------------------------------------------------------------
# Output parsing
# ---------------------------------------------------------------------------


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
        elif ch in "()":
            yield ch
            i += 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n()\"":
                j += 1
            yield text[i:j]
            i = j


def _parse_sexprs(text: str) -> list:
    stack: list[list] = []
    top: list = []
    for tok in _tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise ProtocolError("unbalanced ')' in solver output", text[-500:])
            done = stack.pop()
            (stack[-1] if stack else top).append(done)
        else:
            (stack[-1] if stack else top).append(tok)
    if stack:
        raise ProtocolError("unbalanced '(' in solver output", text[-500:])
    return top


def _parse_value(sx):
    """Exact value from a solver term: numeral, decimal, (/ a b), (- x), bool."""
    if isinstance(sx, str):
        if sx == "true":
            return True
        if sx == "false":
            return False
        try:
            if "." in sx:
                return Fraction(sx if not sx.endswith(".") else sx + "0")
            return Fraction(int(sx))
        except (ValueError, ZeroDivisionError):
            raise ProtocolError(f"cannot parse solver value {sx!r}") from None
    if isinstance(sx, list) and sx:
        if sx[0] == "-" and len(sx) == 2:
            return -_parse_value(sx[1])
        if sx[0] == "/" and len(sx) == 3:
            num, den = _parse_value(sx[1]), _parse_value(sx[2])
            return Fraction(num) / Fraction(den)
    raise ProtocolError(f"cannot parse solver value {sx!r}")


def parse_solver_output(text: str) -> SolverVerdict:
    """Extract the verdict line and, on sat, the get-value model map."""
    lines = text.splitlines()
    verdict = None
    after = ""
    for idx, raw in enumerate(lines):
        line = raw.strip()
        if line in ("sat", "unsat", "unknown"):
            verdict = line
            after = "\n".join(lines[idx + 1:])
            break
        # tolerate banners, blank lines, and pre-verdict noise
    if verdict is None:
        raise ProtocolError("no sat/unsat/unknown verdict in solver output",
                            text[-2000:])
    model = None
    if verdict == "sat":
        # get-value answer: first parenthesized group of (name value) pairs
        model = {}
        for sx in _parse_sexprs(after):
            if not isinstance(sx, list):
                continue
            if sx and sx[0] == "error":
                continue
            for entry in sx:
                if isinstance(entry, list) and len(entry) == 2 \
                        and isinstance(entry[0], str):
                    model[entry[0]] = _parse_value(entry[1])
            if model:
                break
    return SolverVerdict(verdict, model)


# ---------------------------------------------------------------------------
# Process management
# ---------------------------------------------------------------------------


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    try:
        proc.kill()
    except ProcessLookupError:
        pass


def solve(
    script: SmtScript,
    timeout: float,
    solver_cmd: Optional[str] = None,
    cancel=None,
) -> SolverVerdict:
    """Run the solver on the script with a soft timeout (seconds).

    Returns Unknown immediately for timeout <= 0. `cancel` may be a callable
    registering the live process (used by the search loop to interrupt
    in-flight solves); it receives the Popen object, then None on completion.
    """
    if timeout <= 0:
        return SolverVerdict("unknown", wall_time=0.0)
    template = solver_cmd or default_solver_cmd()
    timeout_ms = max(1, math.ceil(timeout * 1000))
    cmd = template.replace("{timeout_ms}", str(timeout_ms))

    tmp_path = None
    if "{file}" in cmd:
        fd, tmp_path = tempfile.mkstemp(suffix=".smt2")
        with os.fdopen(fd, "w") as fh:
            fh.write(script.text)
        cmd = cmd.replace("{file}", shlex.quote(tmp_path))
        stdin_data = None
    else:
        stdin_data = script.text

    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            shlex.split(cmd),
            stdin=subprocess.PIPE if stdin_data is not None else subprocess.DEVNULL,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            start_new_session=True,
        )
    except (OSError, ValueError) as exc:
        if tmp_path:
            os.unlink(tmp_path)
        raise SolverUnavailable(f"cannot start solver {cmd!r}: {exc}") from None

    if cancel is not None:
        cancel(proc)
    killed = False
    try:
        try:
            out, err = proc.communicate(stdin_data, timeout=timeout + GRACE_SECONDS)
        except subprocess.TimeoutExpired:
            killed = True
            _kill_group(proc)
            out, err = proc.communicate()
    finally:
        if proc.poll() is None:
            _kill_group(proc)
            proc.wait()
        if cancel is not None:
            cancel(None)
        if tmp_path:
            os.unlink(tmp_path)
    wall = time.monotonic() - start

    try:
        verdict = parse_solver_output(out or "")
    except ProtocolError:
        if killed:
            return SolverVerdict("unknown", wall_time=wall,
                                 diagnostics="killed after hard timeout")
        if proc.returncode != 0 or not (out or "").strip():
            tail = ((out or "") + "\n" + (err or ""))[-2000:]
            raise ProtocolError(
                f"solver exited with code {proc.returncode} and no verdict",
                tail) from None
        raise
    verdict.wall_time = wall
    return verdict


# ---------------------------------------------------------------------------
# Model decoding
# ---------------------------------------------------------------------------


@dataclass
class DecodedModel:
    instances: list[tuple]
    outputs: list[Fraction]
    aux: dict
    defaulted: set[str] = field(default_factory=set)


def decode_model(verdict: SolverVerdict, task: VerificationTask) -> DecodedModel:
    """Turn a sat model into per-instance witness tuples plus outputs.

    Attribute and auxiliary variables missing from the model default to
    0/false and are flagged; a missing output variable is a protocol error
    since reports cannot be checked without it.
    """
    if verdict.status != "sat" or verdict.model is None:
        raise ProtocolError("decode_model requires a sat verdict with a model")
    model = verdict.model
    defaulted: set[str] = set()
    instances = []
    outputs = []
    for i, e in enumerate(task.instances):
        values = []
        for k, t in enumerate(e.attr_types):
            name = EncodingContext.attr_name(i, k)
            if name in model:
                v = model[name]
                values.append(bool(v) if t == BOOL else Fraction(v))
            else:
                defaulted.add(name)
                values.append(False if t == BOOL else Fraction(0))
        instances.append(tuple(values))
        out_name = EncodingContext.out_name(i)
        if out_name not in model:
            raise ProtocolError(f"solver model is missing output variable {out_name}")
        outputs.append(Fraction(model[out_name]))
    aux = {}
    from .question import collect_aux  # local import to avoid cycle at module load

    for name, sort in collect_aux(task).items():
        if name in model:
            v = model[name]
            aux[name] = bool(v) if sort == BOOL else Fraction(v)
        else:
            defaulted.add(name)
            aux[name] = False if sort == BOOL else Fraction(0)
    return DecodedModel(instances, outputs, aux, defaulted)
