"""Text formats: the "DAP v1" instance file and the one-ack-per-line solution file.

Reals are printed with 17 significant digits so every float64 round-trips
bit-exactly.
"""

from __future__ import annotations

import os

from dap.core import FormatError, Instance, Solution


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_instance(instance: Instance) -> str:
    lines = ["DAP 1", f"d {_fmt(instance.d)}", f"T {instance.horizon}"]
    lines.extend(_fmt(p) for p in instance.demands)
    return "\n".join(lines) + "\n"


def loads_instance(text: str, source: str = "<string>") -> Instance:
    tokens = text.split()
    if len(tokens) < 2 or tokens[0] != "DAP" or tokens[1] != "1":
        raise FormatError(f"{source}: expected header 'DAP 1'")
    if len(tokens) < 6 or tokens[2] != "d" or tokens[4] != "T":
        raise FormatError(f"{source}: expected 'd <real>' and 'T <int>' lines")
    try:
        d = float(tokens[3])
        horizon = int(tokens[5])
    except ValueError as exc:
        raise FormatError(f"{source}: bad d/T value: {exc}") from None
    values = tokens[6:]
    if len(values) != horizon:
        raise FormatError(f"{source}: expected {horizon} demand values, found {len(values)}")
    try:
        demands = tuple(float(v) for v in values)
    except ValueError as exc:
        raise FormatError(f"{source}: bad demand value: {exc}") from None
    try:
        return Instance(d, demands)
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def write_instance(path: str | os.PathLike, instance: Instance) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(instance))


def read_instance(path: str | os.PathLike) -> Instance:
    with open(path) as fh:
        return loads_instance(fh.read(), source=str(path))


def dumps_solution(solution: Solution) -> str:
    return "".join(f"{t}\n" for t in solution.acks)


def loads_solution(text: str, source: str = "<string>") -> Solution:
    acks = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            acks.append(int(line))
        except ValueError:
            raise FormatError(f"{source}:{lineno}: expected an integer ack time, got {line!r}") from None
    try:
        return Solution(tuple(acks))
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def write_solution(path: str | os.PathLike, solution: Solution) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_solution(solution))


def read_solution(path: str | os.PathLike) -> Solution:
    with open(path) as fh:
        return loads_solution(fh.read(), source=str(path))
