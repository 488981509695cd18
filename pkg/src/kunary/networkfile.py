"""JSON network documents.

    {"species": ["A", "B"], "k": [2, 1],
     "reactions": [{"from": 0, "to": 1, "rate": 1.0}, ...]}

Index 0 in ``from``/``to`` is the source/sink.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .crn_model import CrnSpec, validate_spec
from .errors import NegativeRate, ParseError

__all__ = ["parse_network_file", "parse_network", "load_network", "network_to_dict"]


def _fail(path: str, msg: str):
    raise ParseError(f"{path}: {msg}")


def parse_network(doc) -> CrnSpec:
    """Build a spec from an already-decoded document."""
    if not isinstance(doc, dict):
        _fail("$", "network document must be an object")
    for key in ("k", "reactions"):
        if key not in doc:
            _fail("$", f"missing field '{key}'")
    k = doc["k"]
    if not isinstance(k, list) or not k or not all(isinstance(v, int) and not isinstance(v, bool) for v in k):
        _fail("$.k", "must be a non-empty list of integers")
    n = len(k)
    species = doc.get("species")
    if species is not None:
        if not isinstance(species, list) or len(species) != n or not all(isinstance(s, str) for s in species):
            _fail("$.species", f"must be a list of {n} names")
    reactions = doc["reactions"]
    if not isinstance(reactions, list):
        _fail("$.reactions", "must be a list")
    kappa = np.zeros((n + 1, n + 1))
    for idx, r in enumerate(reactions):
        where = f"$.reactions[{idx}]"
        if not isinstance(r, dict):
            _fail(where, "must be an object")
        for key in ("from", "to", "rate"):
            if key not in r:
                _fail(where, f"missing field '{key}'")
        i, j, rate = r["from"], r["to"], r["rate"]
        for key, v in (("from", i), ("to", j)):
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= n:
                _fail(f"{where}.{key}", f"must be an integer in 0..{n}")
        if i == j:
            _fail(where, "'from' and 'to' must differ")
        if not isinstance(rate, (int, float)) or isinstance(rate, bool):
            _fail(f"{where}.rate", "must be a number")
        rate = float(rate)
        if rate < 0:
            raise NegativeRate(f"{where}.rate: {rate!r} is negative")
        if kappa[i, j] != 0:
            _fail(where, f"duplicate reaction {i} -> {j}")
        kappa[i, j] = rate
    return validate_spec(kappa, k, species=species)


def parse_network_file(text: str) -> CrnSpec:
    """Parse a JSON network document; errors carry line/column or field paths."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_network(doc)


def load_network(path) -> CrnSpec:
    return parse_network_file(Path(path).read_text())


def network_to_dict(spec: CrnSpec) -> dict:
    return {
        "species": list(spec.species),
        "k": [int(v) for v in spec.k],
        "reactions": [{"from": i, "to": j, "rate": float(spec.kappa[i, j])} for i, j in spec.reactions],
    }
