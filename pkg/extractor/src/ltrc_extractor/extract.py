"""Extraction jobs: prompt rendering, state capture, LTRC output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ltrc import write_ltrc
from .model import load_backend

POLICIES = ("all_tokens", "last_token")

SUMMARY_TOKEN = "[RET]"


def render_prompt(visual: str | None, query: str | None,
                  instruction: str = "") -> str:
    """Single-word summary prompt; the summary token aggregates the context.

    The subject of the summary clause follows which inputs are present.
    """
    if not visual and not query:
        raise ValueError("need at least one of visual or query input")
    if visual and query:
        subject = "visual input and sentence"
    elif visual:
        subject = "visual input"
    else:
        subject = "sentence"
    parts = ["Question:"]
    if visual:
        parts.append(visual)
    if instruction:
        parts.append(instruction)
    if query:
        parts.append(query if query.endswith(".") else query + ".")
    body = " ".join(parts)
    return f"{body}\nSummary above {subject} in one word: {SUMMARY_TOKEN}."


@dataclass
class ExtractionJob:
    model: str = "tiny"
    visual: str | None = None
    query: str | None = None
    instruction: str = ""
    policy: str = "all_tokens"
    out_path: str = "trace.ltrc"
    device: str = "cpu"
    sample_id: str = "0"
    # tiny-backend shape knobs
    layers: int = 4
    hidden: int = 32
    heads: int = 4
    model_seed: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")


def extract(job: ExtractionJob) -> str:
    """Run the job and write one LTRC file; returns the output path."""
    backend = load_backend(job.model, job.layers, job.hidden, job.heads,
                           job.model_seed, job.device)
    prompt = render_prompt(job.visual, job.query, job.instruction)
    token_ids = backend.tokenizer.encode(prompt)
    if not token_ids:
        raise ValueError("prompt rendered to zero tokens")
    states = backend.hidden_states(token_ids)
    assert states.shape[0] == backend.layer_count
    assert states.shape[1] == len(token_ids), "token count drifted across layers"

    if job.policy == "last_token":
        states = states[:, -1:, :]
    coords = states.numpy().astype(np.float32)

    manifest = {
        "model": job.model,
        "prompt": prompt,
        "policy": job.policy,
        "sample_id": job.sample_id,
        "source_layer_count": str(backend.layer_count),
        "hidden_size": str(backend.hidden_size),
        "token_count": str(coords.shape[1]),
        "generator": "ltrc-extractor",
    }
    write_ltrc(coords, job.out_path, manifest)
    return job.out_path
