"""JSON configuration documents describing an IFS plus numerics.

Rationals are written as "num/den" strings so exact inputs survive a round trip::

    {
      "dimension": 1,
      "maps": [{"kind": "similarity", "ratio": "1/4", "translation": ["0"]}, ...],
      "weights": ["1/3", "1/3", "1/3"],
      "numerics": {"precision_bits": 80, "max_depth": 6, "tolerance": "1/1000"},
      "seed": 0
    }

A map is ``similarity`` (ratio, translation, optional ``flip``, ``rotation``
rows or ``angle`` in radians), ``moebius`` (coefficients a, b, c, d and
domain) or ``affine1d`` (coefficients a, b and domain).  Instead of maps a
document may name a built-in ``system`` (see ``systems.SYSTEMS``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError, InputError
from .ifs import IfsSystem
from .maps import ConformalIntervalMap, SimilarityMap
from .rational import DEFAULT_PRECISION_BITS, Q, fmt
from .systems import SYSTEMS, named


@dataclass(frozen=True)
class Numerics:
    precision_bits: int = DEFAULT_PRECISION_BITS
    max_depth: int = 6
    tolerance: object = Q("1/1000")


@dataclass(frozen=True)
class ConfigDocument:
    dimension: int | None = None
    maps: tuple = ()
    weights: tuple = ()
    numerics: Numerics = field(default_factory=Numerics)
    seed: int = 0
    system: str | None = None
    system_args: tuple = ()

    def build_ifs(self) -> IfsSystem:
        if self.system is not None:
            ifs = named(self.system, **dict(self.system_args))
            if self.numerics.precision_bits != ifs.precision_bits:
                ifs = IfsSystem(ifs.maps, ifs.weights, ifs.alphabet, precision_bits=self.numerics.precision_bits)
            return ifs
        return IfsSystem(self.maps, self.weights, precision_bits=self.numerics.precision_bits)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def as_dict(self) -> dict:
        out = {
            "numerics": {
                "precision_bits": self.numerics.precision_bits,
                "max_depth": self.numerics.max_depth,
                "tolerance": fmt(self.numerics.tolerance),
            },
            "seed": self.seed,
        }
        if self.system is not None:
            out["system"] = self.system
            out.update({k: _dump(v) for k, v in self.system_args})
            return out
        out["dimension"] = self.dimension
        out["maps"] = [_map_dict(m) for m in self.maps]
        out["weights"] = [fmt(w) for w in self.weights]
        return out


def _dump(v):
    if isinstance(v, (list, tuple)):
        return [_dump(x) for x in v]
    if isinstance(v, (int, str)):
        return v
    return fmt(v)


def _map_dict(m) -> dict:
    if isinstance(m, SimilarityMap):
        return {
            "kind": "similarity",
            "ratio": fmt(m.ratio),
            "rotation": [[fmt(v) for v in row] for row in m.orthogonal],
            "translation": [fmt(v) for v in m.translation],
        }
    if m.family == "affine":
        a, b = m.coefficients[:2]
        coeffs = [fmt(a), fmt(b)]
        kind = "affine1d"
    else:
        coeffs = [fmt(v) for v in m.coefficients]
        kind = "moebius"
    return {
        "kind": kind,
        "coefficients": coeffs,
        "domain": [fmt(v) for v in m.domain],
        "holder_constant": fmt(m.holder_constant),
        "holder_exponent": fmt(m.holder_exponent),
    }


def _rational(value, where: str):
    try:
        return Q(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: not a number: {value!r} ({exc})") from None


def _parse_map(entry, i: int, dimension: int):
    where = f"maps[{i}]"
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected an object")
    kind = entry.get("kind", "similarity")
    try:
        if kind == "similarity":
            ratio = _rational(entry.get("ratio"), f"{where}.ratio")
            t = [_rational(v, f"{where}.translation") for v in entry.get("translation", [])]
            if len(t) != dimension:
                raise ConfigError(f"{where}: translation must have {dimension} entries")
            if "rotation" in entry and "angle" in entry:
                raise ConfigError(f"{where}: give rotation rows or an angle, not both")
            if "angle" in entry:
                if dimension != 2:
                    raise ConfigError(f"{where}: angle needs dimension 2")
                th = float(entry["angle"])
                rot = ((math.cos(th), -math.sin(th)), (math.sin(th), math.cos(th)))
            elif "rotation" in entry:
                rot = tuple(tuple(_rational(v, f"{where}.rotation") for v in row) for row in entry["rotation"])
            else:
                rot = tuple(tuple(int(i == j) for j in range(dimension)) for i in range(dimension))
                if entry.get("flip"):
                    rot = ((-1,) + rot[0][1:],) + rot[1:]
            return SimilarityMap(ratio, rot, tuple(t))
        if kind in ("moebius", "affine1d"):
            if dimension != 1:
                raise ConfigError(f"{where}: {kind} maps need dimension 1")
            coeffs = [_rational(v, f"{where}.coefficients") for v in entry.get("coefficients", [])]
            domain = [_rational(v, f"{where}.domain") for v in entry.get("domain", [0, 1])]
            return ConformalIntervalMap(
                "affine" if kind == "affine1d" else "moebius",
                tuple(coeffs),
                tuple(domain),
                _rational(entry.get("holder_constant", 0), f"{where}.holder_constant"),
                _rational(entry.get("holder_exponent", 1), f"{where}.holder_exponent"),
            )
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown map kind {kind!r}")


def parse_config(text: str) -> ConfigDocument:
    """Parse and validate; errors name the offending field, syntax errors carry line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(raw, dict):
        raise ConfigError("the document must be a JSON object", 1, 1)
    num = raw.get("numerics", {})
    try:
        numerics = Numerics(
            int(num.get("precision_bits", DEFAULT_PRECISION_BITS)),
            int(num.get("max_depth", 6)),
            _rational(num.get("tolerance", "1/1000"), "numerics.tolerance"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"numerics: {exc}") from None
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")

    if "system" in raw:
        name = raw["system"]
        if name not in SYSTEMS:
            raise ConfigError(f"system: unknown name {name!r}; choose from {sorted(SYSTEMS)}")
        extra = tuple(sorted((k, v) for k, v in raw.items() if k not in ("system", "numerics", "seed")))
        doc = ConfigDocument(numerics=numerics, seed=seed, system=name, system_args=extra)
        _validate(doc)
        return doc

    dimension = raw.get("dimension")
    if not isinstance(dimension, int) or dimension < 1:
        raise ConfigError("dimension must be a positive integer")
    specs = raw.get("maps")
    if not isinstance(specs, list) or not specs:
        raise ConfigError("maps must be a nonempty list")
    maps = tuple(_parse_map(s, i, dimension) for i, s in enumerate(specs))
    weights = raw.get("weights")
    if not isinstance(weights, list) or len(weights) != len(maps):
        raise ConfigError("weights must list one probability per map")
    weights = tuple(w if isinstance(w, float) else _rational(w, f"weights[{i}]") for i, w in enumerate(weights))
    doc = ConfigDocument(dimension, maps, weights, numerics, seed)
    _validate(doc)
    return doc


def _validate(doc: ConfigDocument) -> None:
    try:
        doc.build_ifs()
    except InputError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> ConfigDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
