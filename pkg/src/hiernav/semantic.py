"""Synthetic vision/semantic embedding field and instruction encoding.

Embeddings are unit vectors drawn from a counter-based generator keyed by
(seed, channel, label), so the field is a pure function of the scene and
the two configuration integers. Swapping in learned encoders only needs a
different ``label_embedding``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

VISUAL = "visual"
SEMANTIC = "semantic"

DEFAULT_DIM = 64
DEFAULT_SEED = 42
IMAGE_NOISE_SIGMA = 0.1


def _key(*parts) -> int:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:16], "little")


@lru_cache(maxsize=4096)
def _label_embedding(label: str, channel: str, n: int, global_seed: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=_key(global_seed, channel, label)))
    v = gen.standard_normal(n)
    v /= np.linalg.norm(v)
    v.flags.writeable = False
    return v


def label_embedding(label: str, channel: str = VISUAL, n: int = DEFAULT_DIM,
                    global_seed: int = DEFAULT_SEED) -> np.ndarray:
    if not label:
        raise ValueError("empty label")
    if channel not in (VISUAL, SEMANTIC):
        raise ValueError(f"unknown channel {channel!r}")
    return _label_embedding(label, channel, int(n), int(global_seed))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


@dataclass
class Instruction:
    kind: str
    target_label: str | None = None
    region_label: str | None = None
    embedding_seed: str | None = None
    position: tuple[float, ...] | None = None

    @classmethod
    def text(cls, target_label: str, region_label: str | None = None) -> "Instruction":
        return cls("text", target_label=target_label, region_label=region_label)

    @classmethod
    def image(cls, embedding_seed: str) -> "Instruction":
        return cls("image", embedding_seed=embedding_seed)

    @classmethod
    def at(cls, x: float, y: float) -> "Instruction":
        return cls("position", position=(float(x), float(y)))

    def validate(self) -> None:
        payloads = {
            "text": self.target_label is not None,
            "image": self.embedding_seed is not None,
            "position": self.position is not None,
        }
        if self.kind not in payloads:
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        if sum(payloads.values()) != 1 or not payloads[self.kind]:
            raise ValueError("instruction must carry exactly one payload matching its kind")
        if self.region_label is not None and self.kind != "text":
            raise ValueError("region_label only applies to text instructions")

    def to_dict(self) -> dict:
        if self.kind == "text":
            d = {"kind": "text", "target_label": self.target_label}
            if self.region_label is not None:
                d["region_label"] = self.region_label
            return d
        if self.kind == "image":
            return {"kind": "image", "embedding_seed": self.embedding_seed}
        return {"kind": "position", "position": list(self.position)}

    @classmethod
    def from_dict(cls, d: dict) -> "Instruction":
        pos = d.get("position")
        inst = cls(
            kind=str(d["kind"]),
            target_label=d.get("target_label"),
            region_label=d.get("region_label"),
            embedding_seed=d.get("embedding_seed"),
            position=tuple(float(v) for v in pos) if pos is not None else None,
        )
        inst.validate()
        return inst

    def describe(self) -> str:
        if self.kind == "text":
            return self.target_label + (f" in {self.region_label}" if self.region_label else "")
        if self.kind == "image":
            return f"image:{self.embedding_seed}"
        return "position:" + ",".join(f"{v:g}" for v in self.position)


@dataclass(frozen=True)
class QueryEmbedding:
    c: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class _Extent:
    rect: tuple[float, float, float, float]
    visual: str
    semantic: str


def _inside(rect, x, y) -> bool:
    return rect[0] <= x <= rect[2] and rect[1] <= y <= rect[3]


class SemanticField:
    """Point -> (f_v, f_s). Objects take precedence over rooms; anything
    outside every room maps to the zero sentinel."""

    def __init__(self, rooms: Iterable, objects: Iterable, n: int = DEFAULT_DIM, seed: int = DEFAULT_SEED):
        self.n = n
        self.seed = seed
        rooms = list(rooms)
        room_label = {r.id: r.label for r in rooms}
        self._objects = [_Extent(o.rect, o.label, room_label[o.room]) for o in objects]
        self._rooms = [_Extent(r.rect, r.label, r.label) for r in rooms]
        # object id -> (object label, room label); image goals resolve through it
        self.catalog = {o.id: (o.label, room_label[o.room]) for o in objects}
        self._zero = np.zeros(n)
        self._zero.flags.writeable = False

    @classmethod
    def from_scenario(cls, scenario, n: int = DEFAULT_DIM, seed: int = DEFAULT_SEED) -> "SemanticField":
        return cls(scenario.rooms, scenario.objects, n, seed)

    @property
    def labels(self) -> list[str]:
        seen = []
        for e in self._objects + self._rooms:
            if e.visual not in seen:
                seen.append(e.visual)
        return seen

    def _extent_at(self, x: float, y: float) -> _Extent | None:
        for e in self._objects:
            if _inside(e.rect, x, y):
                return e
        for e in self._rooms:
            if _inside(e.rect, x, y):
                return e
        return None

    def query(self, p) -> tuple[np.ndarray, np.ndarray]:
        e = self._extent_at(float(p[0]), float(p[1]))
        if e is None:
            return self._zero, self._zero
        return (label_embedding(e.visual, VISUAL, self.n, self.seed),
                label_embedding(e.semantic, SEMANTIC, self.n, self.seed))

    def extent_index(self, points: np.ndarray) -> np.ndarray:
        """Index of the extent answering each point (-1 for the sentinel)."""
        pts = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
        extents = self._objects + self._rooms
        idx = np.full(len(pts), -1)
        for k in range(len(extents) - 1, -1, -1):
            x0, y0, x1, y1 = extents[k].rect
            m = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
            idx[m] = k
        return idx

    def extent_features(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        if k < 0:
            return self._zero, self._zero
        e = (self._objects + self._rooms)[k]
        return (label_embedding(e.visual, VISUAL, self.n, self.seed),
                label_embedding(e.semantic, SEMANTIC, self.n, self.seed))

    def query_many(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised ``query``; returns (N, n) visual and semantic matrices."""
        idx = self.extent_index(points)
        fv = np.zeros((len(idx), self.n))
        fs = np.zeros((len(idx), self.n))
        for k in np.unique(idx[idx >= 0]):
            fv[idx == k], fs[idx == k] = self.extent_features(int(k))
        return fv, fs

    def similarities(self, q: "QueryEmbedding", points: np.ndarray, w_v: float = 0.5) -> np.ndarray:
        """Combined similarity per point, evaluated once per distinct extent so
        points sharing an extent tie exactly."""
        idx = self.extent_index(points)
        out = np.zeros(len(idx))
        for k in np.unique(idx[idx >= 0]):
            out[idx == k] = combined_similarity(q, self.extent_features(int(k)), w_v)
        return out

    def dump(self) -> str:
        return json.dumps({"n": self.n, "seed": self.seed, "labels": self.labels})


def field_query(field: SemanticField, p) -> tuple[np.ndarray, np.ndarray]:
    return field.query(p)


def encode_instruction(instr: Instruction, n: int = DEFAULT_DIM, global_seed: int = DEFAULT_SEED,
                       catalog: dict | None = None, sigma: float = IMAGE_NOISE_SIGMA):
    """Query embedding for text/image goals; position goals pass through.

    Image goals perturb the target's embeddings with isotropic noise whose
    expected norm is ``sigma`` before renormalising.
    """
    instr.validate()
    if instr.kind == "position":
        return np.asarray(instr.position, dtype=float)
    if instr.kind == "text":
        region = instr.region_label or instr.target_label
        return QueryEmbedding(label_embedding(instr.target_label, VISUAL, n, global_seed),
                              label_embedding(region, SEMANTIC, n, global_seed))
    if not catalog or instr.embedding_seed not in catalog:
        raise KeyError(f"image goal names no known object: {instr.embedding_seed!r}")
    obj_label, room_label = catalog[instr.embedding_seed]
    gen = np.random.Generator(np.random.Philox(key=_key(global_seed, "image", instr.embedding_seed)))
    scale = sigma / np.sqrt(n)
    c = label_embedding(obj_label, VISUAL, n, global_seed) + gen.normal(0.0, scale, n)
    s = label_embedding(room_label, SEMANTIC, n, global_seed) + gen.normal(0.0, scale, n)
    return QueryEmbedding(c / np.linalg.norm(c), s / np.linalg.norm(s))


def combined_similarity(q: QueryEmbedding, f: tuple[np.ndarray, np.ndarray], w_v: float = 0.5) -> float:
    if not 0.0 <= w_v <= 1.0:
        raise ValueError("w_v must lie in [0, 1]")
    fv, fs = f
    return w_v * cosine(q.c, fv) + (1 - w_v) * cosine(q.s, fs)
