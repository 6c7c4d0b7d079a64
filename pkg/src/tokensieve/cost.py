"""Transformer prefill cost as a function of input token count.

FLOPs use the 2-ops-per-multiply-accumulate convention: per layer and
token, 8*d^2 for the attention projections, 6*d*d_ff for a gated FFN,
plus 4*n^2*d across the sequence for attention score and value products.
Softmax and normalization costs are omitted (sub-percent at these
sizes). Quantization changes bytes, not the logical FLOP count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class ModelConfig:
    """Decoder shape: layer count, hidden width, FFN width, vocab size."""

    layers: int
    hidden: int
    ffn: int
    vocab: int = 32000
    bytes_per_param: float = 2.0  # 2 FP16, 1 INT8, 0.5 INT4
    param_count: Optional[float] = None

    def __post_init__(self):
        for name in ("layers", "hidden", "ffn", "vocab"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        if self.bytes_per_param <= 0:
            raise ValueError("bytes_per_param must be positive")
        if self.param_count is None:
            derived = (
                2.0 * self.vocab * self.hidden
                + self.layers * (4.0 * self.hidden**2 + 3.0 * self.hidden * self.ffn)
            )
            object.__setattr__(self, "param_count", derived)


def prefill_flops(cfg: ModelConfig, n_tokens: int) -> float:
    """FLOPs for one prefill pass over ``n_tokens`` input tokens."""
    if n_tokens < 1:
        raise ValueError("n_tokens must be >= 1")
    n = float(n_tokens)
    per_token = cfg.layers * (8.0 * cfg.hidden**2 + 6.0 * cfg.hidden * cfg.ffn)
    attention = cfg.layers * 4.0 * n * n * cfg.hidden
    return n * per_token + attention


def kv_cache_bytes(cfg: ModelConfig, n_tokens: int) -> float:
    """Bytes held by the key/value cache after prefill."""
    if n_tokens < 1:
        raise ValueError("n_tokens must be >= 1")
    return 2.0 * cfg.layers * n_tokens * cfg.hidden * cfg.bytes_per_param
