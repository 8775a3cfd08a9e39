"""Textual problem-file format.

One `key = value` assignment per line; values are Python literals, with
matrices written as row-major nested lists.  Lines starting with `#` and
blank lines are ignored.  Required keys: A, B, Q, R, P, Gx, Gu, b, T,
theta_box.  Writes round-trip through decimal text at 17 significant
digits, which reproduces every double exactly.
"""

from __future__ import annotations

import ast
import os
import tempfile

import numpy as np

from .model import LtiOcProblem

REQUIRED_KEYS = ("A", "B", "Q", "R", "P", "Gx", "Gu", "b", "T", "theta_box")


def loads(text: str) -> LtiOcProblem:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        try:
            values[key] = ast.literal_eval(rhs.strip())
        except (ValueError, SyntaxError) as exc:
            raise ValueError(f"line {lineno}: bad literal for {key}: {exc}") from exc
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    return LtiOcProblem(**{k: values[k] for k in REQUIRED_KEYS})


def load(path) -> LtiOcProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def _fmt(value) -> str:
    arr = np.asarray(value)
    if arr.ndim == 0:
        return repr(float(arr))
    if arr.ndim == 1:
        return "[" + ", ".join(repr(float(v)) for v in arr) + "]"
    rows = ("[" + ", ".join(repr(float(v)) for v in row) + "]" for row in arr)
    return "[" + ", ".join(rows) + "]"


def dumps(problem: LtiOcProblem) -> str:
    lines = ["# linear-quadratic optimal control problem"]
    for key in REQUIRED_KEYS:
        lines.append(f"{key} = {_fmt(getattr(problem, key))}")
    return "\n".join(lines) + "\n"


def save(problem: LtiOcProblem, path) -> None:
    write_atomic(path, dumps(problem))


def write_atomic(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
