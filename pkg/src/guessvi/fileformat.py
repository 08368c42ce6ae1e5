"""Line-oriented explicit model format.

::

    MODEL mc|mdp
    OBJECTIVE reach|ssp
    STATES n
    KIND i d|p          # one per state
    EDGE i j [prob]     # prob required exactly when state i is probabilistic
    TARGET i weight
    COST i weight       # SSP only, every non-target state

Blank lines and anything after ``#`` are ignored. Numbers are written with
``repr`` so a parse of a serialised model reproduces it bit for bit.
"""
from __future__ import annotations

import math

import numpy as np

from .model import DECISION, PROBABILISTIC, Model, ModelError, Objective, ObjectiveKind, validate


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _int(tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(line, f"expected an integer, got {tok!r}") from None


def _float(tok: str, line: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(line, f"expected a number, got {tok!r}") from None
    if not math.isfinite(v):
        raise ParseError(line, f"number {tok!r} is not finite")
    return v


def parse_model(text: str) -> Model:
    header: dict[str, tuple[str, int]] = {}
    n = None
    kinds: dict[int, int] = {}
    edges: list[tuple[int, int, float | None, int]] = []
    targets: dict[int, float] = {}
    costs: dict[int, float] = {}

    def state(tok: str, line: int) -> int:
        if n is None:
            raise ParseError(line, "STATES must come before state references")
        s = _int(tok, line)
        if not 0 <= s < n:
            raise ParseError(line, f"state {s} out of range 0..{n - 1}")
        return s

    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if not body:
            continue
        key, args = body[0].upper(), body[1:]
        if key in ("MODEL", "OBJECTIVE"):
            if len(args) != 1:
                raise ParseError(no, f"{key} takes one argument")
            allowed = ("mc", "mdp") if key == "MODEL" else ("reach", "ssp")
            if args[0].lower() not in allowed:
                raise ParseError(no, f"{key} must be one of {'|'.join(allowed)}")
            if key in header:
                raise ParseError(no, f"duplicate {key}")
            header[key] = (args[0].lower(), no)
        elif key == "STATES":
            if n is not None or len(args) != 1:
                raise ParseError(no, "STATES must appear once with one argument")
            n = _int(args[0], no)
            if n < 1:
                raise ParseError(no, "model needs at least one state")
        elif key == "KIND":
            if len(args) != 2 or args[1].lower() not in ("d", "p"):
                raise ParseError(no, "KIND takes a state and d|p")
            s = state(args[0], no)
            if s in kinds:
                raise ParseError(no, f"duplicate KIND for state {s}")
            kinds[s] = DECISION if args[1].lower() == "d" else PROBABILISTIC
        elif key == "EDGE":
            if len(args) not in (2, 3):
                raise ParseError(no, "EDGE takes a source, a successor and an optional probability")
            p = _float(args[2], no) if len(args) == 3 else None
            edges.append((state(args[0], no), state(args[1], no), p, no))
        elif key in ("TARGET", "COST"):
            if len(args) != 2:
                raise ParseError(no, f"{key} takes a state and a weight")
            s, w = state(args[0], no), _float(args[1], no)
            table = targets if key == "TARGET" else costs
            if s in table:
                raise ParseError(no, f"duplicate {key} for state {s}")
            table[s] = w
        else:
            raise ParseError(no, f"unknown keyword {body[0]!r}")

    for key in ("MODEL", "OBJECTIVE"):
        if key not in header:
            raise ParseError(0, f"missing {key}")
    if n is None:
        raise ParseError(0, "missing STATES")
    missing = sorted(set(range(n)) - set(kinds))
    if missing:
        raise ParseError(0, f"state {missing[0]} has no KIND")
    ssp = header["OBJECTIVE"][0] == "ssp"
    if costs and not ssp:
        raise ParseError(header["OBJECTIVE"][1], "COST lines need OBJECTIVE ssp")

    rows: list[list] = [[] for _ in range(n)]
    for s, t, p, no in edges:
        if kinds[s] == DECISION and p is not None:
            raise ParseError(no, "prob on decision edge")
        if kinds[s] == PROBABILISTIC and p is None:
            raise ParseError(no, f"probabilistic state {s} needs an edge probability")
        rows[s].append((t, p) if p is not None else t)
    if ssp:
        for s in range(n):
            if s not in targets and s not in costs:
                raise ParseError(0, f"SSP state {s} has no COST")
        obj = Objective.ssp(n, targets, costs)
    else:
        obj = Objective.reach(n, targets)
    model = Model.from_rows([kinds[s] for s in range(n)], rows, obj,
                            mc=header["MODEL"][0] == "mc")
    validate(model)
    return model


def serialize_model(model: Model) -> str:
    obj = model.objective
    out = [f"MODEL {'mc' if model.mc else 'mdp'}",
           f"OBJECTIVE {obj.kind.value}",
           f"STATES {model.num_states}"]
    for s in range(model.num_states):
        out.append(f"KIND {s} {'p' if model.kind[s] == PROBABILISTIC else 'd'}")
    for s in range(model.num_states):
        prob = model.kind[s] == PROBABILISTIC
        for t, p in zip(model.successors(s).tolist(), model.probabilities(s).tolist()):
            out.append(f"EDGE {s} {t} {p!r}" if prob else f"EDGE {s} {t}")
    for t in obj.targets:
        out.append(f"TARGET {t} {float(obj.weights[t])!r}")
    if obj.kind is ObjectiveKind.SSP:
        for s in np.flatnonzero(~obj.target_mask).tolist():
            out.append(f"COST {s} {float(obj.weights[s])!r}")
    return "\n".join(out) + "\n"


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(model))


__all__ = ["ParseError", "ModelError", "parse_model", "serialize_model", "load_model", "save_model"]
