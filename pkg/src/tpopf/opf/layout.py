"""Mapping between named OPF quantities and the flat decision vector."""

from __future__ import annotations

import numpy as np


class VariableLayout:
    """Named blocks of decision variables.

    Each block is an integer array of flat positions; ``-1`` marks entries
    that exist in the block's shape but are not decision variables (slack
    bus voltages, phases a single-phase PV is not connected to, ...).
    """

    def __init__(self):
        self.blocks: dict[str, np.ndarray] = {}
        self.size = 0

    def add(self, name: str, shape: tuple[int, ...], mask=None) -> np.ndarray:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name!r}")
        mask = np.ones(shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != tuple(shape):
            raise ValueError(f"mask shape {mask.shape} != {shape}")
        idx = np.full(shape, -1, dtype=np.int64)
        count = int(mask.sum())
        idx[mask] = np.arange(self.size, self.size + count)
        self.size += count
        self.blocks[name] = idx
        return idx

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def __contains__(self, name: str) -> bool:
        return name in self.blocks

    def unflatten(self, x) -> dict[str, np.ndarray]:
        """Block values; non-variable entries are NaN."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise ValueError(f"expected vector of length {self.size}, got {x.shape}")
        out = {}
        for name, idx in self.blocks.items():
            vals = np.full(idx.shape, np.nan)
            mask = idx >= 0
            vals[mask] = x[idx[mask]]
            out[name] = vals
        return out

    def flatten(self, values: dict[str, np.ndarray]) -> np.ndarray:
        x = np.zeros(self.size)
        for name, idx in self.blocks.items():
            mask = idx >= 0
            x[idx[mask]] = np.asarray(values[name], dtype=float)[mask]
        return x

    def describe(self, position: int) -> tuple[str, tuple[int, ...]]:
        """Block name and multi-index of a flat position."""
        for name, idx in self.blocks.items():
            hit = np.argwhere(idx == position)
            if hit.size:
                return name, tuple(int(v) for v in hit[0])
        raise IndexError(position)
