"""Canonical JSON and CSV serialization for problems and results.

Floats are written with 17 significant digits, keys are sorted and
non-finite values are written as the strings ``"inf"``, ``"-inf"`` and
``"nan"`` so that files stay strict JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .entropies import EntropyFunction
from .geometry import CostMatrix, GroundSpace
from .solver import DiscreteMeasure, ETOptions, ETProblem, ETSolution

__all__ = [
    "InputError", "fmt", "dumps", "loads", "load_json", "parse_floats",
    "ProblemSpec", "problem_from_dict", "problem_to_dict", "solution_to_dict",
    "write_csv", "read_csv_table", "options_from_dict",
]


class InputError(ValueError):
    """Malformed or inconsistent input; the CLI maps it to exit status 2."""


def fmt(x: float, digits: int = 17) -> str:
    """Canonical text for a float."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0.0"
    s = format(x, f".{digits}g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in obj]
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Canonical JSON text, newline terminated."""
    return _encode(obj, indent, 0) + "\n"


def loads(text: str, source: str = "<input>") -> Any:
    """Parse JSON, reporting syntax errors with line and column."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return loads(text, path)


def parse_floats(values, what: str = "values") -> np.ndarray:
    """Array of floats from JSON numbers or the strings ``inf``/``-inf``."""
    def one(v):
        if isinstance(v, (list, tuple)):
            return [one(u) for u in v]
        if isinstance(v, str):
            key = v.strip().lower()
            if key in ("inf", "+inf", "infinity"):
                return math.inf
            if key in ("-inf", "-infinity"):
                return -math.inf
            raise InputError(f"{what}: cannot read {v!r} as a number")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InputError(f"{what}: cannot read {v!r} as a number")
        return float(v)
    try:
        return np.array(one(values), dtype=float)
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from None


# ----------------------------------------------------------------------
# problems


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Everything a problem file can contain."""

    space: GroundSpace
    mu1: DiscreteMeasure
    mu2: DiscreteMeasure
    entropy1: EntropyFunction
    entropy2: EntropyFunction
    cost: CostMatrix
    opts: ETOptions
    raw: dict

    @property
    def problem(self) -> ETProblem:
        return ETProblem(self.entropy1, self.entropy2, self.cost, self.mu1, self.mu2, self.space)


def _measure(d, name: str, n: int) -> DiscreteMeasure:
    if d is None:
        return DiscreteMeasure.empty()
    if isinstance(d, list):
        weights = parse_floats(d, name)
        return DiscreteMeasure.from_dense(weights)
    if not isinstance(d, dict) or "weights" not in d:
        raise InputError(f"{name} needs 'support' and 'weights'")
    weights = parse_floats(d["weights"], f"{name}.weights")
    support = d.get("support", list(range(len(weights))))
    try:
        mu = DiscreteMeasure(np.asarray(support, dtype=np.int64), weights)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: {exc}") from None
    if len(mu) and (mu.support.min() < 0 or mu.support.max() >= n):
        raise InputError(f"{name}: support index outside the {n} ground points")
    return mu


def options_from_dict(d: Optional[dict]) -> ETOptions:
    d = dict(d or {})
    known = set(ETOptions.__dataclass_fields__)
    bad = set(d) - known
    if bad:
        raise InputError(f"unknown solver options: {sorted(bad)}")
    if "epsilon_schedule" in d:
        d["epsilon_schedule"] = tuple(float(x) for x in d["epsilon_schedule"])
    try:
        return ETOptions(**d)
    except (TypeError, ValueError) as exc:
        raise InputError(f"opts: {exc}") from None


def problem_from_dict(d: dict) -> ProblemSpec:
    """Build a problem from its JSON form.

    Missing entropies default to the logarithmic family and a missing cost
    to the log cost, which is the Hellinger-Kantorovich setting.
    """
    if not isinstance(d, dict):
        raise InputError("problem file must contain a JSON object")
    if "space" not in d:
        raise InputError("problem needs a 'space'")
    try:
        sd = d["space"]
        if isinstance(sd, dict) and "dist" in sd:
            sd = {"dist": parse_floats(sd["dist"], "space.dist")}
        space = GroundSpace.from_dict(sd)
        cost = CostMatrix.from_dict(d.get("cost", {"kind": "log"}), space)
        e1 = EntropyFunction.from_dict(d.get("entropy1", {"family": "power", "p": 1.0}))
        e2 = EntropyFunction.from_dict(d.get("entropy2", {"family": "power", "p": 1.0}))
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    n = len(space)
    mu1 = _measure(d.get("mu1"), "mu1", n)
    mu2 = _measure(d.get("mu2"), "mu2", n)
    if cost.values.shape != (n, n):
        raise InputError(f"cost matrix shape {cost.values.shape} does not match {n} points")
    return ProblemSpec(space, mu1, mu2, e1, e2, cost, options_from_dict(d.get("opts")), d)


def problem_to_dict(spec: ProblemSpec) -> dict:
    out = {
        "space": spec.space.to_dict(),
        "cost": spec.cost.to_dict(),
        "entropy1": spec.entropy1.to_dict(),
        "entropy2": spec.entropy2.to_dict(),
        "mu1": spec.mu1.to_dict(),
        "mu2": spec.mu2.to_dict(),
    }
    if "opts" in spec.raw:
        out["opts"] = spec.raw["opts"]
    return out


def solution_to_dict(sol: ETSolution, problem: ETProblem, threshold: float = 0.0) -> dict:
    s1, s2 = problem.mu1.support, problem.mu2.support
    return {
        "plan": [[int(s1[i]), int(s2[j]), float(w)] for i, j, w in sol.triplets(threshold)],
        "potentials": {
            "psi1": {"support": s1.tolist(), "values": sol.potentials.psi1.tolist()},
            "psi2": {"support": s2.tolist(), "values": sol.potentials.psi2.tolist()},
        },
        "primal": sol.primal,
        "dual": sol.dual,
        "gap": sol.gap,
        "status": sol.status,
    }


# ----------------------------------------------------------------------
# CSV


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], digits: int = 17) -> str:
    """CSV text with canonical float formatting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v, digits) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def read_csv_table(path: str) -> tuple[list[str], np.ndarray]:
    """Header and float body of a numeric CSV file."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty CSV")
    header = [c.strip() for c in rows[0]]
    body = []
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise InputError(f"{path}:{k}: expected {len(header)} columns, got {len(r)}")
        try:
            body.append([float(c) for c in r])
        except ValueError:
            raise InputError(f"{path}:{k}: non-numeric entry") from None
    return header, np.array(body, dtype=float).reshape(len(body), len(header))
