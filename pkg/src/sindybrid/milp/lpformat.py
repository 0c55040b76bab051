"""CPLEX LP text format: export of assembled problems, and a reader.

The writer emits the plain subset of the format (Minimize / Subject To /
Bounds / Binaries / Generals / End) with explicit coefficients so that any
external MILP solver can cross-check an instance.  The reader parses that
same subset back into arrays, which is enough for round-trip tests and for
feeding scipy's MILP interface as an independent check.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problem import MilpProblem

__all__ = ["export_lp", "parse_lp", "ParsedLp"]

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_TOKEN = re.compile(rf"({_NUM})|({_NAME})|(<=|>=|=|\+|-|:)")

_SECTIONS = {
    "minimize": "objective",
    "min": "objective",
    "subject": "constraints",
    "st": "constraints",
    "bounds": "bounds",
    "bound": "bounds",
    "binaries": "binaries",
    "binary": "binaries",
    "bin": "binaries",
    "generals": "generals",
    "general": "generals",
    "gen": "generals",
    "end": "end",
}


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _terms(names, coefs, per_line=6):
    """Render a linear expression as wrapped '+/- coef name' lines."""
    parts = []
    for name, coef in zip(names, coefs):
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(coef))} {name}")
    if not parts:
        parts = ["+ 0 " + names[0]]
    lines = []
    for k in range(0, len(parts), per_line):
        lines.append(" " + " ".join(parts[k: k + per_line]))
    # Strip the leading '+' of the very first term, LP style.
    lines[0] = " " + lines[0].lstrip()[2:] if lines[0].lstrip().startswith("+ ") else lines[0]
    return lines


def export_lp(problem: MilpProblem, destination) -> Path:
    """Write the instance to `destination` in CPLEX LP text format."""
    out = []
    out.append(
        f"\\ sparse-correction MILP: rows={problem.rows} "
        f"N_L={problem.n_library} N_S={problem.n_states}"
    )
    out.append("Minimize")
    obj_lines = _terms(problem.var_names, problem.c)
    out.append(" obj:" + obj_lines[0])
    out.extend(obj_lines[1:])

    out.append("Subject To")
    for k in range(problem.n_constraints):
        row = problem.A[k]
        nz = np.flatnonzero(row)
        lines = _terms([problem.var_names[j] for j in nz], row[nz])
        out.append(f" c{k}:" + lines[0])
        out.extend(lines[1:])
        out[-1] += f" <= {_fmt(problem.b[k])}"

    out.append("Bounds")
    for j, name in enumerate(problem.var_names):
        lo, up, binary = problem.lo[j], problem.up[j], problem.is_binary[j]
        if binary:
            continue                      # Binaries section implies [0, 1]
        if lo == 0.0 and up == np.inf:
            continue                      # LP-format default
        if up == np.inf:
            out.append(f" {name} >= {_fmt(lo)}")
        else:
            out.append(f" {_fmt(lo)} <= {name} <= {_fmt(up)}")

    binaries = [n for n, flag in zip(problem.var_names, problem.is_binary) if flag]
    if binaries:
        out.append("Binaries")
        for k in range(0, len(binaries), 8):
            out.append(" " + " ".join(binaries[k: k + 8]))
    generals = [n for n, flag in zip(problem.var_names, problem.is_integer) if flag]
    if generals:
        out.append("Generals")
        out.append(" " + " ".join(generals))
    out.append("End")

    path = Path(destination)
    path.write_text("\n".join(out) + "\n")
    return path


@dataclass
class ParsedLp:
    """An LP/MILP instance read back from text."""

    objective: dict                      # name -> coefficient
    constraints: list                    # (label, {name: coef}, sense, rhs)
    bounds: dict = field(default_factory=dict)   # name -> [lo, up]
    binaries: set = field(default_factory=set)
    generals: set = field(default_factory=set)

    @property
    def variable_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for name in self.objective:
            seen.setdefault(name)
        for _, terms, _, _ in self.constraints:
            for name in terms:
                seen.setdefault(name)
        for name in list(self.bounds) + sorted(self.binaries) + sorted(self.generals):
            seen.setdefault(name)
        return list(seen)

    def to_arrays(self):
        """(names, c, A, b, sense, lo, up, is_binary, is_integer) as arrays.

        All constraints are normalised to the sense they were written with;
        sense is returned as -1/0/+1 for <=, =, >=.
        """
        names = self.variable_names
        index = {n: j for j, n in enumerate(names)}
        n = len(names)
        c = np.zeros(n)
        for name, coef in self.objective.items():
            c[index[name]] = coef
        m = len(self.constraints)
        A = np.zeros((m, n))
        b = np.zeros(m)
        sense = np.zeros(m, dtype=int)
        for k, (_, terms, sns, rhs) in enumerate(self.constraints):
            for name, coef in terms.items():
                A[k, index[name]] += coef
            b[k] = rhs
            sense[k] = {"<=": -1, "=": 0, ">=": 1}[sns]
        lo = np.zeros(n)
        up = np.full(n, np.inf)
        for name in self.binaries:
            up[index[name]] = 1.0
        for name, (l, u) in self.bounds.items():
            lo[index[name]] = l
            up[index[name]] = u
        is_binary = np.array([name in self.binaries for name in names])
        is_integer = np.array([name in self.generals for name in names])
        return names, c, A, b, sense, lo, up, is_binary, is_integer


def _tokenize(text: str):
    tokens = []
    for line in text.splitlines():
        body = line.split("\\", 1)[0]
        for num, name, op in _TOKEN.findall(body):
            if num:
                tokens.append(("num", float(num)))
            elif name:
                tokens.append(("name", name))
            else:
                tokens.append(("op", op))
    return tokens


def _parse_expression(tokens, pos):
    """Parse '+/- coef name' terms until a sense operator or section break."""
    terms: dict[str, float] = {}
    sign = 1.0
    coef = None
    while pos < len(tokens):
        kind, val = tokens[pos]
        if kind == "op" and val in ("<=", ">=", "="):
            break
        if kind == "name" and val.lower() in _SECTIONS:
            break
        if kind == "op" and val == "+":
            pass
        elif kind == "op" and val == "-":
            sign = -sign
        elif kind == "num":
            coef = val if coef is None else coef * val
        elif kind == "name":
            terms[val] = terms.get(val, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
        else:
            raise ValueError(f"unexpected token {val!r} in expression")
        pos += 1
    return terms, sign, coef, pos


def parse_lp(source) -> ParsedLp:
    """Read an LP instance from a file path, or from text if it has newlines."""
    if isinstance(source, Path) or "\n" not in str(source):
        text = Path(source).read_text()
    else:
        text = str(source)
    tokens = _tokenize(text)

    parsed = ParsedLp(objective={}, constraints=[])
    section = None
    pos = 0
    while pos < len(tokens):
        kind, val = tokens[pos]
        if kind == "name" and val.lower() in _SECTIONS:
            low = val.lower()
            section = _SECTIONS[low]
            pos += 1
            if (
                low == "subject"
                and pos < len(tokens)
                and tokens[pos][0] == "name"
                and tokens[pos][1].lower() == "to"
            ):
                pos += 1
            if section == "end":
                break
            continue

        if section == "objective":
            # Optional 'obj:' label.
            if kind == "name" and pos + 1 < len(tokens) and tokens[pos + 1] == ("op", ":"):
                pos += 2
            terms, _, _, pos = _parse_expression(tokens, pos)
            for name, coefficient in terms.items():
                parsed.objective[name] = parsed.objective.get(name, 0.0) + coefficient

        elif section == "constraints":
            label = ""
            if kind == "name" and pos + 1 < len(tokens) and tokens[pos + 1] == ("op", ":"):
                label = val
                pos += 2
            terms, _, _, pos = _parse_expression(tokens, pos)
            if pos >= len(tokens) or tokens[pos][0] != "op":
                raise ValueError(f"constraint {label!r} has no sense operator")
            sense = tokens[pos][1]
            pos += 1
            rhs_sign = 1.0
            while pos < len(tokens) and tokens[pos] == ("op", "-"):
                rhs_sign = -rhs_sign
                pos += 1
            if pos >= len(tokens) or tokens[pos][0] != "num":
                raise ValueError(f"constraint {label!r} has no numeric right-hand side")
            parsed.constraints.append((label, terms, sense, rhs_sign * tokens[pos][1]))
            pos += 1

        elif section == "bounds":
            pos = _parse_bound_line(tokens, pos, parsed.bounds)

        elif section == "binaries":
            if kind == "name":
                parsed.binaries.add(val)
            pos += 1

        elif section == "generals":
            if kind == "name":
                parsed.generals.add(val)
            pos += 1

        else:
            raise ValueError(f"token {val!r} before any section header")

    for name in parsed.binaries:
        parsed.bounds.setdefault(name, [0.0, 1.0])
    return parsed


def _read_signed_number(tokens, pos):
    sign = 1.0
    while pos < len(tokens) and tokens[pos] == ("op", "-"):
        sign = -sign
        pos += 1
    if pos < len(tokens) and tokens[pos] == ("op", "+"):
        pos += 1
    kind, val = tokens[pos]
    if kind == "name" and val.lower() in ("inf", "infinity"):
        return sign * np.inf, pos + 1
    if kind != "num":
        raise ValueError(f"expected a number in bounds, got {val!r}")
    return sign * val, pos + 1


def _parse_bound_line(tokens, pos, bounds: dict) -> int:
    """Parse one bound declaration starting at pos; returns the next pos."""
    kind, val = tokens[pos]
    if kind == "name":
        name = val
        if pos + 1 < len(tokens) and tokens[pos + 1] == ("name", "free"):
            bounds[name] = [-np.inf, np.inf]
            return pos + 2
        op = tokens[pos + 1][1]
        value, nxt = _read_signed_number(tokens, pos + 2)
        lo, up = bounds.get(name, [0.0, np.inf])
        if op == ">=":
            bounds[name] = [value, up]
        elif op == "<=":
            bounds[name] = [lo, value]
        else:  # '='
            bounds[name] = [value, value]
        return nxt
    # Form: lo <= name <= up
    lo_val, pos = _read_signed_number(tokens, pos)
    if tokens[pos] != ("op", "<="):
        raise ValueError("malformed bound line")
    name = tokens[pos + 1][1]
    pos += 2
    up_val = np.inf
    if pos < len(tokens) and tokens[pos] == ("op", "<="):
        up_val, pos = _read_signed_number(tokens, pos + 1)
    bounds[name] = [lo_val, up_val]
    return pos
