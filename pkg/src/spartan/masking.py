"""Mask units over named parameter arrays.

A :class:`PruningGroupSpec` describes how entries of a flat parameter
vector are grouped into mask units (one unit per entry, or one per
``B x B`` block of a 2-d array), what each unit costs, and how units are
valued. ``spec.build(layout)`` compiles it into a :class:`UnitMap` that does
the actual gather/scatter work.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "ParamLayout",
    "PruningGroupSpec",
    "UnitMap",
    "LayerSpec",
    "FlopReport",
    "unit_values",
    "expand_mask",
    "collapse_grad",
    "flop_cost",
    "block_beta",
]

LAYOUTS = ("per_entry", "blocks")


class ParamLayout:
    """Ordered named arrays packed into one flat float64 vector."""

    def __init__(self, shapes: Sequence[tuple[str, tuple[int, ...]]]):
        self.names: list[str] = []
        self.shapes: dict[str, tuple[int, ...]] = {}
        self.slices: dict[str, slice] = {}
        offset = 0
        for name, shape in shapes:
            if name in self.shapes:
                raise ValueError(f"duplicate parameter name {name!r}")
            shape = tuple(int(s) for s in shape)
            size = int(np.prod(shape)) if shape else 1
            self.names.append(name)
            self.shapes[name] = shape
            self.slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

    def unpack(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        flat = np.asarray(flat)
        if flat.shape != (self.size,):
            raise ValueError(f"expected flat vector of length {self.size}, got shape {flat.shape}")
        return {n: flat[self.slices[n]].reshape(self.shapes[n]) for n in self.names}

    def pack(self, arrays: Mapping[str, np.ndarray]) -> np.ndarray:
        out = np.empty(self.size)
        for n in self.names:
            a = np.asarray(arrays[n], dtype=np.float64)
            if a.shape != self.shapes[n]:
                raise ValueError(f"{n}: expected shape {self.shapes[n]}, got {a.shape}")
            out[self.slices[n]] = a.reshape(-1)
        return out


@dataclass(frozen=True)
class PruningGroupSpec:
    """How parameters map to mask units.

    ``entry_cost`` gives a per-entry cost for each named array (default 1);
    a block unit costs ``entry_cost * B**2`` unless ``unit_cost`` overrides
    the full per-unit cost vector. Units are valued by
    ``cost**valuation_exponent * sum(|theta|)``.
    """

    layout: str = "per_entry"
    block_size: int = 1
    entry_cost: Mapping[str, float] = field(default_factory=dict)
    unit_cost: Optional[Sequence[float]] = None
    excluded_tensors: frozenset = frozenset()
    prune_biases: bool = False
    valuation_exponent: float = 0.0

    def __post_init__(self) -> None:
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.layout == "blocks" and int(self.block_size) < 1:
            raise ValueError("block_size must be >= 1")
        if not 0.0 <= self.valuation_exponent <= 1.0:
            raise ValueError("valuation_exponent must lie in [0, 1]")
        for name, cost in self.entry_cost.items():
            if not cost > 0:
                raise ValueError(f"entry cost for {name!r} must be > 0")
        object.__setattr__(self, "excluded_tensors", frozenset(self.excluded_tensors))

    def is_excluded(self, name: str) -> bool:
        if name in self.excluded_tensors:
            return True
        return not self.prune_biases and name.endswith("bias")

    def build(self, layout: ParamLayout) -> "UnitMap":
        unknown = set(self.entry_cost) - set(layout.names)
        if unknown:
            raise ValueError(f"entry_cost names not in model: {sorted(unknown)}")
        unit_of = np.full(layout.size, -1, dtype=np.int64)
        costs: list[np.ndarray] = []
        tensor_of_unit: list[str] = []
        n_units = 0
        for name in layout.names:
            if self.is_excluded(name):
                continue
            shape = layout.shapes[name]
            sl = layout.slices[name]
            entry_cost = float(self.entry_cost.get(name, 1.0))
            if self.layout == "per_entry":
                size = sl.stop - sl.start
                unit_of[sl] = n_units + np.arange(size)
                costs.append(np.full(size, entry_cost))
                n_new = size
            else:
                B = int(self.block_size)
                if len(shape) != 2:
                    raise ValueError(f"block layout needs 2-d arrays; {name!r} has shape {shape}")
                rows, cols = shape
                if rows % B or cols % B:
                    raise ValueError(f"{name!r} shape {shape} not divisible by block size {B}")
                br, bc = rows // B, cols // B
                r = np.arange(rows)[:, None] // B
                q = np.arange(cols)[None, :] // B
                unit_of[sl] = (n_units + r * bc + q).reshape(-1)
                n_new = br * bc
                costs.append(np.full(n_new, entry_cost * B * B))
            tensor_of_unit.extend([name] * n_new)
            n_units += n_new
        cost_vec = np.concatenate(costs) if costs else np.zeros(0)
        if self.unit_cost is not None:
            override = np.asarray(self.unit_cost, dtype=np.float64).reshape(-1)
            if override.size != n_units:
                raise ValueError(f"unit_cost has {override.size} entries, expected {n_units}")
            if np.any(override <= 0):
                raise ValueError("unit costs must be strictly positive")
            cost_vec = override
        return UnitMap(unit_of, cost_vec, self.valuation_exponent, tensor_of_unit)


class UnitMap:
    """Compiled entry-to-unit assignment.

    ``expand`` and ``collapse`` are adjoint linear maps (excluded entries
    map to zero); ``expand_mask`` is ``expand`` with excluded entries set to 1.
    """

    def __init__(self, unit_of: np.ndarray, costs: np.ndarray, valuation_exponent: float = 0.0,
                 tensor_of_unit: Optional[Sequence[str]] = None):
        self.unit_of = np.asarray(unit_of, dtype=np.int64)
        self.costs = np.asarray(costs, dtype=np.float64)
        self.n_units = int(self.costs.size)
        self.included = self.unit_of >= 0
        self._idx = self.unit_of[self.included]
        self.valuation_exponent = float(valuation_exponent)
        self.value_scale = self.costs ** self.valuation_exponent
        self.tensor_of_unit = list(tensor_of_unit) if tensor_of_unit is not None else []
        self.entries_per_unit = np.bincount(self._idx, minlength=self.n_units)

    @classmethod
    def per_entry(cls, d: int, costs: Optional[Sequence[float]] = None, valuation_exponent: float = 0.0) -> "UnitMap":
        c = np.ones(d) if costs is None else np.asarray(costs, dtype=np.float64)
        return cls(np.arange(d), c, valuation_exponent)

    @property
    def size(self) -> int:
        return int(self.unit_of.size)

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.costs))

    def _check(self, x: np.ndarray, n: int, what: str) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != n:
            raise ValueError(f"{what}: expected length {n}, got {x.size}")
        return x

    def collapse(self, y: np.ndarray) -> np.ndarray:
        y = self._check(y, self.size, "collapse")
        return np.bincount(self._idx, weights=y[self.included], minlength=self.n_units)

    def expand(self, x: np.ndarray, fill: float = 0.0) -> np.ndarray:
        x = self._check(x, self.n_units, "expand")
        out = np.full(self.size, float(fill))
        out[self.included] = x[self._idx]
        return out

    def expand_mask(self, unit_mask: np.ndarray) -> np.ndarray:
        return self.expand(unit_mask, fill=1.0)

    def unit_values(self, theta: np.ndarray) -> np.ndarray:
        theta = self._check(theta, self.size, "unit_values")
        return self.value_scale * self.collapse(np.abs(theta))


def unit_values(theta: np.ndarray, units: UnitMap) -> np.ndarray:
    return units.unit_values(theta)


def expand_mask(unit_mask: np.ndarray, units: UnitMap) -> np.ndarray:
    return units.expand_mask(unit_mask)


def collapse_grad(entry_values: np.ndarray, units: UnitMap) -> np.ndarray:
    return units.collapse(entry_values)


class LayerSpec(NamedTuple):
    name: str
    in_dim: int
    out_dim: int


class FlopReport(NamedTuple):
    per_layer: dict
    total: float


def flop_cost(layers: Sequence[LayerSpec], entry_masks: Optional[Mapping[str, np.ndarray]] = None) -> FlopReport:
    """Inference FLOPs at batch size 1, multiply and add counted separately.

    A fully-connected layer costs two FLOPs per nonzero weight.
    """
    entry_masks = entry_masks or {}
    per_layer = {}
    for layer in layers:
        mask = entry_masks.get(layer.name)
        if mask is None:
            nnz = layer.in_dim * layer.out_dim
        else:
            mask = np.asarray(mask)
            if mask.size != layer.in_dim * layer.out_dim:
                raise ValueError(f"{layer.name}: mask size {mask.size} != {layer.in_dim * layer.out_dim}")
            nnz = int(np.count_nonzero(mask))
        per_layer[layer.name] = 2.0 * nnz
    return FlopReport(per_layer, float(sum(per_layer.values())))


def block_beta(beta: float, block_size: int) -> float:
    """Sharpness for ``B x B`` blocks given the unstructured value.

    Block values average ``B**2`` entries, shrinking their spread by about
    ``B``, so beta is scaled up by ``B``.
    """
    return float(beta) * int(block_size)
