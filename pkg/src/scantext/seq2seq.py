"""Fully convolutional encoder-decoder with per-layer attention.

The window feature sequence is projected to the hidden width and combined
with learned absolute position embeddings.  Encoder blocks are
same-padded gated convolutions with scaled residual connections; decoder
blocks are causal gated convolutions, each followed by its own attention
pass over the encoder output.  Attention scores are dot products between a
decoder state summary (state projection plus the previous-target
embedding) and the encoder outputs; the attended context, a weighted sum
of encoder outputs plus source embeddings, is added back to the block
state.  The top decoder state maps linearly to next-token scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .layers import Conv1d, EmbeddingTable, Linear
from .optim import Parameter
from .tensor import Tensor

RESIDUAL_SCALE = float(np.sqrt(0.5))

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"

DEFAULT_CHARSET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
DIGITS_CHARSET = "0123456789"


class Vocabulary:
    """Ordered character set plus start/end/pad specials, densely indexed."""

    def __init__(self, charset: str = DEFAULT_CHARSET):
        if not charset:
            raise ValueError("charset must be nonempty")
        if len(set(charset)) != len(charset):
            raise ValueError("charset has duplicate symbols")
        for special in (PAD, BOS, EOS):
            if special in charset:
                raise ValueError(f"charset may not contain {special!r}")
        self.charset = charset
        self.tokens: list[str] = [PAD, BOS, EOS, *charset]
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        try:
            return [self.index[ch] for ch in text]
        except KeyError as exc:
            raise ValueError(f"symbol {exc.args[0]!r} not in charset") from None

    def decode(self, ids) -> str:
        """Token ids to text; specials are dropped."""
        return "".join(self.tokens[i] for i in ids if i > self.eos_id)


@dataclass(frozen=True)
class SeqModelConfig:
    d_hidden: int = 256
    enc_layers: int = 3
    dec_layers: int = 2
    enc_kernel: int = 5
    dec_kernel: int = 7
    dropout_p: float = 0.5
    max_src_positions: int = 64
    max_tgt_positions: int = 32

    def __post_init__(self):
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise ValueError("layer counts must be >= 1")
        if self.enc_kernel % 2 == 0:
            raise ValueError("encoder kernel must be odd for same padding")


@dataclass
class SourceRepresentation:
    """Projected features with positions (e) and encoder output (z_u)."""
    e: Tensor    # (B, m, d_hidden)
    z_u: Tensor  # (B, m, d_hidden)

    @property
    def length(self) -> int:
        return self.e.shape[-2]


@dataclass
class AttentionMap:
    """Per-layer, per-output-step weights over source windows."""
    weights: np.ndarray  # (dec_layers, n, m); each row sums to 1

    @property
    def dec_layers(self) -> int:
        return self.weights.shape[0]

    @property
    def steps(self) -> int:
        return self.weights.shape[1]


class _DecoderBlock:
    def __init__(self, prefix: str, cfg: SeqModelConfig,
                 rng: np.random.Generator):
        d = cfg.d_hidden
        self.conv = Conv1d(f"{prefix}.conv", cfg.dec_kernel, d, 2 * d, rng,
                           pad="causal")
        self.attn_proj = Linear(f"{prefix}.attn", d, d, rng)

    def parameters(self) -> list[Parameter]:
        return self.conv.parameters() + self.attn_proj.parameters()


class ConvSeq2Seq:
    """Maps a feature sequence and a shifted target prefix to next-token
    scores, with one attention pass per decoder layer."""

    def __init__(self, vocab: Vocabulary, feature_dim: int,
                 cfg: SeqModelConfig, rng: np.random.Generator,
                 prefix: str = "seq"):
        self.vocab = vocab
        self.cfg = cfg
        d = cfg.d_hidden
        self.src_proj = Linear(f"{prefix}.src_proj", feature_dim, d, rng)
        self.src_pos = EmbeddingTable(f"{prefix}.src_pos",
                                      cfg.max_src_positions, d, rng)
        self.enc_convs = [Conv1d(f"{prefix}.encoder{i}.conv", cfg.enc_kernel,
                                 d, 2 * d, rng, pad="same")
                          for i in range(cfg.enc_layers)]
        self.tgt_embed = EmbeddingTable(f"{prefix}.tgt_embed", len(vocab), d, rng)
        self.tgt_pos = EmbeddingTable(f"{prefix}.tgt_pos",
                                      cfg.max_tgt_positions, d, rng)
        self.dec_blocks = [_DecoderBlock(f"{prefix}.decoder{i}", cfg, rng)
                           for i in range(cfg.dec_layers)]
        self.out_proj = Linear(f"{prefix}.out_proj", d, len(vocab), rng)

    def parameters(self) -> list[Parameter]:
        params = self.src_proj.parameters() + self.src_pos.parameters()
        for c in self.enc_convs:
            params += c.parameters()
        params += self.tgt_embed.parameters() + self.tgt_pos.parameters()
        for b in self.dec_blocks:
            params += b.parameters()
        return params + self.out_proj.parameters()

    # -- source side --------------------------------------------------------

    def embed_source(self, features: Tensor) -> Tensor:
        """Project feature rows to the hidden width and add the learned
        position embedding: e_j = proj(s_j) + p_j."""
        m = features.shape[-2]
        if m > self.cfg.max_src_positions:
            raise ValueError(f"{m} source positions exceed table size "
                             f"{self.cfg.max_src_positions}")
        pos = self.src_pos(np.arange(m))
        return T.add(self.src_proj(features), pos)

    def encode(self, e: Tensor, training: bool = False,
               rng: np.random.Generator | None = None) -> Tensor:
        """Stack of gated same-padded conv blocks with scaled residuals."""
        p = self.cfg.dropout_p
        x = e
        for conv in self.enc_convs:
            inner = T.glu(conv(T.dropout(x, p, training, rng)))
            x = T.scale(T.add(inner, x), RESIDUAL_SCALE)
        return x

    def encode_source(self, features: Tensor, training: bool = False,
                      rng: np.random.Generator | None = None) -> SourceRepresentation:
        e = self.embed_source(features)
        e = T.dropout(e, self.cfg.dropout_p, training, rng)
        return SourceRepresentation(e=e, z_u=self.encode(e, training, rng))

    # -- attention -----------------------------------------------------------

    def attention(self, layer: int, h: Tensor, g: Tensor,
                  src: SourceRepresentation) -> tuple[Tensor, Tensor]:
        """One attention pass: summary d = proj(h) + g, weights from
        d . z_u dot products, context from the weighted sum of z_u + e."""
        if src.length == 0:
            raise ValueError("attention: empty source")
        d = T.add(self.dec_blocks[layer].attn_proj(h), g)
        scores = T.matmul(d, src.z_u, transpose_b=True)   # (..., n, m)
        weights = T.softmax(scores)
        context = T.matmul(weights, T.add(src.z_u, src.e))
        return context, weights

    # -- decoder -------------------------------------------------------------

    def decode_teacher_forced(self, targets: np.ndarray,
                              src: SourceRepresentation,
                              training: bool = False,
                              rng: np.random.Generator | None = None,
                              ) -> tuple[Tensor, AttentionMap]:
        """Score every next token given the shifted-in gold prefix.

        targets: int array (n,) or (B, n); row i is the token fed at step i
        (starting with <s>), and output row i scores token i+1.  Returns
        logits (B?, n, |V|) and the per-layer attention map of the first
        batch element.
        """
        tgt = np.asarray(targets)
        squeeze = tgt.ndim == 1
        if squeeze:
            tgt = tgt[None]
        if tgt.ndim != 2:
            raise ValueError(f"targets must be 1-d or 2-d, got {tgt.ndim}-d")
        n = tgt.shape[1]
        if n > self.cfg.max_tgt_positions:
            raise ValueError(f"{n} target positions exceed table size "
                             f"{self.cfg.max_tgt_positions}")
        if tgt.min() < 0 or tgt.max() >= len(self.vocab):
            raise ValueError("target token index outside vocabulary")
        p = self.cfg.dropout_p
        g = T.add(self.tgt_embed(tgt), self.tgt_pos(np.arange(n)))
        g = T.dropout(g, p, training, rng)
        x = g
        maps = []
        for layer in range(self.cfg.dec_layers):
            block = self.dec_blocks[layer]
            h = T.glu(block.conv(T.dropout(x, p, training, rng)))
            context, weights = self.attention(layer, h, g, src)
            x = T.scale(T.add(T.add(h, context), x), RESIDUAL_SCALE)
            maps.append(weights.data[0])
        logits = self.out_proj(x)
        amap = AttentionMap(weights=np.stack(maps, axis=0))
        return (T.reshape(logits, logits.shape[1:]) if squeeze else logits), amap
