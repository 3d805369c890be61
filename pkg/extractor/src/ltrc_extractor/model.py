"""Decoder backends that expose per-layer hidden states.

The default backend is a deterministic tiny random-weight pre-LN decoder:
no downloads, fixed seed, byte-identical states across runs. Local
HuggingFace checkpoints are supported through a lazy transformers import.
Hidden states are captured after each decoder block (post-residual);
the embedding output before block 1 is not included.
"""

from __future__ import annotations

import math

import torch
from torch import nn


class ByteTokenizer:
    """Byte-level tokenizer; has no registered special tokens.

    The summary token is therefore appended literally as prompt text,
    which preserves its position semantics at desk scale.
    """

    vocab_size = 256

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids) -> str:
        return bytes(int(i) for i in ids).decode("utf-8", errors="replace")


class _Block(nn.Module):
    def __init__(self, hidden: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(hidden)
        self.attn = nn.MultiheadAttention(hidden, heads, batch_first=True)
        self.ln2 = nn.LayerNorm(hidden)
        self.mlp = nn.Sequential(
            nn.Linear(hidden, 4 * hidden),
            nn.GELU(),
            nn.Linear(4 * hidden, hidden),
        )

    def forward(self, x, mask):
        h = self.ln1(x)
        attn_out, _ = self.attn(h, h, h, attn_mask=mask, need_weights=False)
        x = x + attn_out
        x = x + self.mlp(self.ln2(x))
        return x


class TinyDecoder(nn.Module):
    """Random-weight causal decoder with per-block state capture."""

    def __init__(self, layers: int = 4, hidden: int = 32, heads: int = 4,
                 seed: int = 0, max_len: int = 2048):
        super().__init__()
        if hidden % heads:
            raise ValueError(f"hidden ({hidden}) must be divisible by heads ({heads})")
        torch.manual_seed(seed)
        self.tokenizer = ByteTokenizer()
        self.embed = nn.Embedding(self.tokenizer.vocab_size, hidden)
        self.pos = nn.Embedding(max_len, hidden)
        self.blocks = nn.ModuleList(_Block(hidden, heads) for _ in range(layers))
        self.layer_count = layers
        self.hidden_size = hidden
        self.eval()

    @torch.no_grad()
    def hidden_states(self, token_ids: list[int]) -> torch.Tensor:
        """Post-block states for one sequence; shape (layers, N, hidden)."""
        n = len(token_ids)
        ids = torch.tensor(token_ids, dtype=torch.long).unsqueeze(0)
        x = self.embed(ids) + self.pos(torch.arange(n).unsqueeze(0))
        mask = torch.triu(torch.full((n, n), -math.inf), diagonal=1)
        states = []
        for block in self.blocks:
            x = block(x, mask)
            states.append(x.squeeze(0))
        return torch.stack(states)


class HFDecoder:
    """Local HuggingFace causal LM wrapper (lazy import, no hub access)."""

    def __init__(self, path: str, device: str = "cpu"):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(path, local_files_only=True)
        self.model = AutoModelForCausalLM.from_pretrained(
            path, local_files_only=True).to(device).eval()
        self.device = device
        self.layer_count = self.model.config.num_hidden_layers
        self.hidden_size = self.model.config.hidden_size

    def encode(self, text: str) -> list[int]:
        return self.tokenizer.encode(text)

    @torch.no_grad()
    def hidden_states(self, token_ids: list[int]) -> torch.Tensor:
        ids = torch.tensor(token_ids, dtype=torch.long, device=self.device).unsqueeze(0)
        out = self.model(ids, output_hidden_states=True)
        # hidden_states[0] is the embedding output; keep post-block states only
        return torch.stack([h.squeeze(0).cpu() for h in out.hidden_states[1:]])


def load_backend(model: str, layers: int, hidden: int, heads: int,
                 model_seed: int, device: str):
    if model == "tiny":
        return TinyDecoder(layers=layers, hidden=hidden, heads=heads, seed=model_seed)
    return HFDecoder(model, device=device)
