"""Scale training and application."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .spec import ScaleSpec

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


class ScaleError(ValueError):
    pass


class ScaleTypeError(TypeError):
    pass


def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _value_kind(v: Any) -> str:
    if isinstance(v, bool):
        return "boolean"
    if _is_num(v):
        return "number"
    return "text"


@dataclass(frozen=True)
class TrainedScale:
    spec: ScaleSpec
    domain: tuple
    range: tuple
    contributors: tuple[tuple[str, str], ...] = ()

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def continuous(self) -> bool:
        """Domain is a closed interval (linear, or identity over numbers)."""
        return self.kind == "linear" or (
            self.kind == "identity" and bool(self.domain) and all(_is_num(v) for v in self.domain))

    def contains(self, v: Any) -> bool:
        if self.continuous:
            return _is_num(v) and self.domain[0] <= v <= self.domain[1]
        return any(v == d and _value_kind(v) == _value_kind(d) for d in self.domain)

    def apply(self, v: Any) -> Any:
        if not self.contains(v):
            raise ScaleError(f"scale {self.name}: value {v!r} is outside the trained domain")
        if self.kind == "identity":
            return v
        if self.kind == "linear":
            d0, d1 = self.domain
            lo, hi = self.range
            if d0 == d1:
                return (lo + hi) / 2
            return lo + (v - d0) / (d1 - d0) * (hi - lo)
        i = next(j for j, d in enumerate(self.domain) if d == v and _value_kind(d) == _value_kind(v))
        if all(isinstance(r, str) for r in self.range):
            return self.range[i % len(self.range)]
        lo, hi = self.range
        return lo + (i + 0.5) * (hi - lo) / len(self.domain)

    def ticks(self, count: int = 5) -> list[tuple[Any, Any]]:
        """(domain value, range value) pairs for an axis or legend."""
        if self.continuous:
            d0, d1 = self.domain
            if d0 == d1:
                return [(d0, self.apply(d0))]
            vals = [d0 + (d1 - d0) * i / (count - 1) for i in range(count)]
            vals[-1] = d1
            return [(v, self.apply(v)) for v in vals]
        return [(v, self.apply(v)) for v in self.domain]


def train(spec: ScaleSpec, columns: Iterable[Sequence[Any]], range_: Sequence | None = None,
          contributors: Sequence[tuple[str, str]] = ()) -> TrainedScale:
    """Fit *spec* to the given value columns.  An explicit domain or range on
    *spec* takes precedence over the data and over *range_*."""
    values = [v for col in columns for v in col]
    kinds = {_value_kind(v) for v in values}
    if len(kinds) > 1:
        raise ScaleTypeError(f"scale {spec.name}: mixed value types {sorted(kinds)}")
    rng = tuple(spec.range) if spec.range is not None else (
        tuple(range_) if range_ is not None else None)
    if spec.kind == "linear":
        if kinds - {"number"}:
            raise ScaleTypeError(f"scale {spec.name}: linear scales need numeric data")
        if spec.domain is not None:
            domain = tuple(spec.domain)
        elif values:
            domain = (min(values), max(values))
        else:
            raise ScaleError(f"scale {spec.name}: no data to train on and no explicit domain")
        if rng is None or len(rng) != 2 or not all(_is_num(r) for r in rng):
            raise ScaleError(f"scale {spec.name}: linear scales need a [lo, hi] range")
    elif spec.kind == "ordinal":
        if spec.domain is not None:
            domain = tuple(spec.domain)
        elif values:
            domain = tuple(_distinct(values))
        else:
            raise ScaleError(f"scale {spec.name}: no data to train on and no explicit domain")
        if rng is None:
            raise ScaleError(f"scale {spec.name}: no range")
        if not (all(isinstance(r, str) for r in rng) or (len(rng) == 2 and all(_is_num(r) for r in rng))):
            raise ScaleError(f"scale {spec.name}: bad ordinal range {rng!r}")
    else:
        if spec.domain is not None:
            domain = tuple(spec.domain)
            if all(_is_num(v) for v in domain) and len(domain) != 2:
                raise ScaleError(f"scale {spec.name}: numeric identity domain must be [min, max]")
        elif values:
            if kinds == {"number"}:
                domain = (min(values), max(values))
            else:
                domain = tuple(_distinct(values))
        else:
            raise ScaleError(f"scale {spec.name}: no data to train on and no explicit domain")
        rng = ()
    return TrainedScale(spec, domain, rng, tuple(contributors))


def _distinct(values: Iterable[Any]) -> list:
    out, seen = [], set()
    for v in values:
        k = (_value_kind(v), v)
        if k not in seen:
            seen.add(k)
            out.append(v)
    return out
