"""
On-disk cache of exact generation data.

Each region's :class:`~lpflux.construction.ModeBlock` is stored as an
``.npz`` file of its integer arrays next to a JSON metadata file.  File names
are the SHA-256 of the canonical key, which includes ``SCHEMA_VERSION``, so a
format change simply misses.  Unreadable or mismatched entries are rebuilt
with a notice.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .construction import FieldSpec, ModeBlock, enumerate_region, mode_block, preload_block

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

__all__ = ["BlockCache", "SCHEMA_VERSION", "spec_hash"]


def _key(eps: Fraction, q: int, i: int, negative_control: Optional[str]) -> dict:
    return {"schema": SCHEMA_VERSION, "eps": str(Fraction(eps)), "q": q, "i": i, "negative_control": negative_control}


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def spec_hash(spec: FieldSpec) -> str:
    """Stable hash of the field parameters."""
    return _digest({"schema": SCHEMA_VERSION, **spec.key()})


@dataclass
class BlockCache:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)
        self.hits = 0
        self.misses = 0

    def _paths(self, key: dict):
        h = _digest(key)
        return self.root / f"{h}.npz", self.root / f"{h}.json"

    def load(self, spec: FieldSpec, q: int, i: int) -> Optional[ModeBlock]:
        key = _key(spec.eps, q, i, spec.negative_control)
        data_p, meta_p = self._paths(key)
        if not (data_p.exists() and meta_p.exists()):
            return None
        try:
            meta = json.loads(meta_p.read_text())
            if meta.get("key") != key:
                raise ValueError("key mismatch")
            with np.load(data_p) as z:
                arrs = {k: z[k] for k in ("xi", "P", "Q", "den")}
        except Exception as exc:  # corrupt or stale entry
            log.warning("rebuilding cache entry %s (%s)", data_p.name, exc)
            return None
        reg = enumerate_region(spec.with_(q_min=min(q, spec.q_min), q_max=max(q, spec.q_max)), q, i)
        if len(arrs["xi"]) != reg.count or (reg.count and not np.array_equal(arrs["xi"], reg.points)):
            log.warning("rebuilding cache entry %s (region changed)", data_p.name)
            return None
        dirs = (arrs["P"] + math.sqrt(15.0) * arrs["Q"]) / arrs["den"][:, None]
        for a in (*arrs.values(), dirs):
            a.setflags(write=False)
        return ModeBlock(region=reg, dirs=dirs, **arrs)

    def store(self, spec: FieldSpec, q: int, i: int, block: ModeBlock) -> None:
        key = _key(spec.eps, q, i, spec.negative_control)
        data_p, meta_p = self._paths(key)
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = data_p.with_suffix(".tmp.npz")
        np.savez(tmp, xi=block.xi, P=block.P, Q=block.Q, den=block.den)
        os.replace(tmp, data_p)
        meta_p.write_text(json.dumps({"key": key, "count": len(block)}, sort_keys=True))

    def warm(self, spec: FieldSpec, q: int) -> dict:
        """Load or build every region of generation ``q``; returns ``{i: 'hit' | 'miss'}``."""
        out = {}
        for i in (1, 2, 3):
            b = self.load(spec, q, i)
            if b is None:
                self.misses += 1
                b = mode_block(spec.eps, q, i, spec.negative_control)
                self.store(spec, q, i, b)
                out[i] = "miss"
            else:
                self.hits += 1
                out[i] = "hit"
            preload_block(spec.eps, q, i, spec.negative_control, b)
        return out
