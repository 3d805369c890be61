"""Layer-trace exchange format (LTRC) and deterministic synthetic traces.

One trace file holds the hidden states of a single calibration sample:
L point clouds of N tokens in d dimensions, stored as little-endian
float32. A human-readable manifest rides in a JSON sidecar so the binary
stays fixed-layout.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"LTRC"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")  # magic, version, L, N, d, reserved

SCENARIOS = ("cluster_merge", "cluster_split", "rotation_drift", "redundant_plateau")

# Plateau block planted by the redundant_plateau scenario (1-based layers).
PLATEAU_FIRST = 3
PLATEAU_LAST = 5


class TraceError(ValueError):
    """Invalid trace contents or malformed LTRC file."""


@dataclass
class LayerTrace:
    """L stacked point clouds, one per transformer layer.

    coords has shape (L, N, d), float32. Points are tokens tracked through
    depth, so N is identical across layers.
    """

    coords: np.ndarray
    manifest: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float32)
        if arr.ndim != 3:
            raise TraceError(f"coords must be (L, N, d), got shape {arr.shape}")
        L, N, d = arr.shape
        if L < 2:
            raise TraceError(f"layer_count must be >= 2, got {L}")
        if N < 1:
            raise TraceError(f"token_count must be >= 1, got {N}")
        if d < 1:
            raise TraceError(f"dim must be >= 1, got {d}")
        if not np.isfinite(arr).all():
            raise TraceError("coords contain non-finite values")
        self.coords = arr

    @property
    def layer_count(self) -> int:
        return self.coords.shape[0]

    @property
    def token_count(self) -> int:
        return self.coords.shape[1]

    @property
    def dim(self) -> int:
        return self.coords.shape[2]

    def layer(self, ell: int) -> np.ndarray:
        """Point cloud of 1-based layer ell."""
        return self.coords[ell - 1]

    def scaled(self, factor: float) -> "LayerTrace":
        return LayerTrace((self.coords * np.float32(factor)).astype(np.float32),
                          dict(self.manifest))

    def subsample_tokens(self, indices) -> "LayerTrace":
        idx = np.asarray(sorted(indices), dtype=int)
        return LayerTrace(self.coords[:, idx, :].copy(), dict(self.manifest))

    def __eq__(self, other):
        if not isinstance(other, LayerTrace):
            return NotImplemented
        return (self.coords.shape == other.coords.shape
                and np.array_equal(self.coords, other.coords)
                and self.manifest == other.manifest)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a deterministic synthetic trace.

    Same seed + spec produces a byte-identical trace.
    """

    seed: int
    token_count: int
    dim: int
    layer_count: int
    scenario: str
    noise_scale: float = 0.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise TraceError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.token_count < 1:
            raise TraceError("token_count must be >= 1")
        if self.layer_count < 2:
            raise TraceError("layer_count must be >= 2")
        if self.dim < 1:
            raise TraceError("dim must be >= 1")
        if self.noise_scale < 0:
            raise TraceError("noise_scale must be >= 0")
        if self.scenario in ("rotation_drift", "redundant_plateau") and self.dim < 2:
            raise TraceError(f"{self.scenario} needs dim >= 2")
        if self.scenario == "redundant_plateau" and self.layer_count < 4:
            raise TraceError("redundant_plateau needs layer_count >= 4")


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


def write_trace(trace: LayerTrace, path) -> None:
    """Write an LTRC file plus its manifest sidecar.

    Validates the trace before touching the filesystem, so a rejected
    trace never leaves a partial file behind.
    """
    if not np.isfinite(trace.coords).all():
        raise TraceError("coords contain non-finite values")
    L, N, d = trace.coords.shape
    payload = np.ascontiguousarray(trace.coords, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, L, N, d, 0))
        fh.write(payload)
    with open(manifest_path(path), "w", encoding="utf-8") as fh:
        json.dump({str(k): str(v) for k, v in trace.manifest.items()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_trace(path) -> LayerTrace:
    """Read an LTRC file; loads the manifest sidecar when present.

    Raises TraceError naming the offending field for any malformed input.
    """
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise TraceError(f"header: expected {_HEADER.size} bytes, file has {len(head)}")
        magic, version, L, N, d, reserved = _HEADER.unpack(head)
        if magic != MAGIC:
            raise TraceError(f"bad magic: expected {MAGIC!r}, found {magic!r}")
        if version != VERSION:
            raise TraceError(f"version: expected {VERSION}, found {version}")
        if reserved != 0:
            raise TraceError(f"reserved: expected 0, found {reserved}")
        expected = L * N * d * 4
        payload = fh.read()
    if len(payload) != expected:
        raise TraceError(
            f"truncated payload: header declares L*N*d = {L}*{N}*{d} "
            f"({expected} bytes), found {len(payload)} bytes")
    coords = np.frombuffer(payload, dtype="<f4").reshape(L, N, d).copy()
    manifest: dict[str, str] = {}
    mpath = manifest_path(path)
    if mpath.exists():
        try:
            with open(mpath, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TraceError(f"manifest: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise TraceError("manifest: expected a flat JSON object")
        manifest = {str(k): str(v) for k, v in raw.items()}
    return LayerTrace(coords, manifest)


def synth_trace(spec: SynthSpec) -> LayerTrace:
    """Generate a deterministic synthetic trace for one scenario.

    cluster_merge / cluster_split move two Gaussian clusters together /
    apart across depth. rotation_drift rigidly rotates a ring per layer.
    redundant_plateau freezes layers PLATEAU_FIRST..min(PLATEAU_LAST, L)
    to one draw and re-jitters a ring everywhere else, planting a known
    redundant block.
    """
    rng = np.random.default_rng(spec.seed)
    build = {
        "cluster_merge": _clusters,
        "cluster_split": _clusters,
        "rotation_drift": _rotation,
        "redundant_plateau": _plateau,
    }[spec.scenario]
    coords = build(spec, rng).astype(np.float32)
    manifest = {
        "generator": "synth",
        "scenario": spec.scenario,
        "seed": str(spec.seed),
        "noise_scale": repr(spec.noise_scale),
    }
    return LayerTrace(coords, manifest)


def _clusters(spec: SynthSpec, rng) -> np.ndarray:
    L, N, d = spec.layer_count, spec.token_count, spec.dim
    half = N // 2
    sign = np.ones(N)
    sign[:half] = -1.0
    offsets = rng.normal(scale=0.08, size=(N, d))
    noise = rng.normal(scale=spec.noise_scale, size=(L, N, d)) if spec.noise_scale else 0.0
    coords = np.empty((L, N, d))
    for ell in range(L):
        # separation shrinks to zero for merge, grows from zero for split
        t = ell / (L - 1)
        sep = (1.0 - t) if spec.scenario == "cluster_merge" else t
        centers = np.zeros((N, d))
        centers[:, 0] = sign * 0.5 * sep
        coords[ell] = centers + offsets
    return coords + noise


def _ring(angles: np.ndarray, d: int) -> np.ndarray:
    pts = np.zeros((angles.size, d))
    pts[:, 0] = np.cos(angles)
    pts[:, 1] = np.sin(angles)
    return pts


def _rotation(spec: SynthSpec, rng) -> np.ndarray:
    L, N, d = spec.layer_count, spec.token_count, spec.dim
    base = 2.0 * math.pi * np.arange(N) / N
    step = 2.0 * math.pi / (3.0 * L)
    noise = rng.normal(scale=spec.noise_scale, size=(L, N, d)) if spec.noise_scale else 0.0
    coords = np.stack([_ring(base + ell * step, d) for ell in range(L)])
    return coords + noise


def _plateau(spec: SynthSpec, rng) -> np.ndarray:
    """Frozen ring block inside layers of reshuffled clique clusters.

    Plateau layers repeat one ring draw, carrying a single long-lived
    loop. Every other layer scatters the tokens into a few well-separated
    tight clusters with re-randomized membership, so consecutive
    complexes share only fragments (short-lived components) and, being
    complete-graph cliques, contribute no loops of their own.
    """
    L, N, d = spec.layer_count, spec.token_count, spec.dim
    first, last = PLATEAU_FIRST - 1, min(PLATEAU_LAST, L) - 1
    n_clusters = 4 if N >= 8 else 2
    coords = np.empty((L, N, d))
    frozen = None
    for ell in range(L):
        if frozen is not None and first <= ell <= last:
            coords[ell] = frozen
            continue
        if ell == first:
            ang = 2.0 * math.pi * np.arange(N) / N
            rad = 1.0 + rng.normal(scale=0.02, size=N)
            layer = np.zeros((N, d))
            layer[:, 0] = rad * np.cos(ang)
            layer[:, 1] = rad * np.sin(ang)
        else:
            members = rng.permutation(N)
            centers = rng.normal(size=(n_clusters, d))
            centers *= 4.0 / np.linalg.norm(centers, axis=1, keepdims=True)
            layer = rng.normal(scale=0.15, size=(N, d))
            for c in range(n_clusters):
                chunk = members[c * N // n_clusters:(c + 1) * N // n_clusters]
                layer[chunk] += centers[c]
        if spec.noise_scale:
            layer = layer + rng.normal(scale=spec.noise_scale, size=(N, d))
        coords[ell] = layer
        if ell == first:
            frozen = layer
    return coords
