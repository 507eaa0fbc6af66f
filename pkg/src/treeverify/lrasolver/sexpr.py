"""Minimal S-expression reader for SMT-LIB2 scripts.

Produces nested Python lists with string atoms. Handles line comments,
double-quoted string literals (with "" escapes), and |quoted| symbols.
"""

from __future__ import annotations


class SexprError(ValueError):
    pass


def tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch
            i += 1
        elif ch == '"':
            j = i + 1
            out = []
            while True:
                if j >= n:
                    raise SexprError("unterminated string literal")
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        out.append('"')
                        j += 2
                        continue
                    break
                out.append(text[j])
                j += 1
            yield '"' + "".join(out) + '"'
            i = j + 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SexprError("unterminated quoted symbol")
            yield text[i + 1:j]
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();\"|":
                j += 1
            yield text[i:j]
            i = j


def parse_all(text: str) -> list:
    """Parse every top-level expression in the text."""
    stack: list[list] = []
    top: list = []
    for tok in tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise SexprError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else top).append(done)
        else:
            (stack[-1] if stack else top).append(tok)
    if stack:
        raise SexprError("unbalanced '('")
    return top
