"""Encoder/decoder attention model emitting raw beamforming parameters.

The 2K user coordinates enter as a sequence of scalar tokens, each embedded
by a shared learnable vector plus a fixed sinusoidal positional code.  A
bidirectional self-attention encoder mixes them; the decoder starts from a
learnable token bank, self-attends, cross-attends to the encoder state and
maps every token to one scalar through a shared head.  The resulting
S_dec = N + N*L + 2K raw values are consumed by the differentiable decode
pipeline in physics.py.

Attention heads use full-width N_model x N_model projections and the
scores are scaled by sqrt(N_model).
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .config import TransformerConfig

DTYPE = torch.float64


def sinusoidal_positions(length: int, n_model: int) -> torch.Tensor:
    """PE[i, 2j] = sin(i / 10000^(2j/n_model)), PE[i, 2j+1] = cos(same)."""
    pos = torch.arange(length, dtype=DTYPE)[:, None]
    j = torch.arange(n_model // 2, dtype=DTYPE)[None, :]
    angle = pos / torch.pow(torch.tensor(10000.0, dtype=DTYPE),
                            2.0 * j / n_model)
    pe = torch.zeros(length, n_model, dtype=DTYPE)
    pe[:, 0::2] = torch.sin(angle)
    pe[:, 1::2] = torch.cos(angle)
    return pe


class MultiHeadAttention(nn.Module):
    """Full-width heads: each head owns N_model x N_model projections."""

    def __init__(self, n_model: int, n_heads: int):
        super().__init__()
        self.n_model = n_model
        self.n_heads = n_heads
        shape = (n_heads, n_model, n_model)
        scale = 1.0 / math.sqrt(n_model)
        self.w_q = nn.Parameter(scale * torch.randn(shape, dtype=DTYPE))
        self.w_k = nn.Parameter(scale * torch.randn(shape, dtype=DTYPE))
        self.w_v = nn.Parameter(scale * torch.randn(shape, dtype=DTYPE))
        self.w_o = nn.Parameter(scale * torch.randn(n_heads * n_model, n_model,
                                                    dtype=DTYPE))

    def attention_weights(self, q_state, k_state):
        """(B, heads, S_q, S_k) softmax rows; exposed for tests."""
        q = torch.einsum("bsm,hmn->bhsn", q_state, self.w_q)
        k = torch.einsum("bsm,hmn->bhsn", k_state, self.w_k)
        scores = torch.einsum("bhsn,bhtn->bhst", q, k) / math.sqrt(self.n_model)
        return torch.softmax(scores, dim=-1)

    def _combine(self, weights, v_state):
        v = torch.einsum("bsm,hmn->bhsn", v_state, self.w_v)
        heads = torch.einsum("bhst,bhtn->bhsn", weights, v)
        b, _, s, _ = heads.shape
        concat = heads.permute(0, 2, 1, 3).reshape(b, s, -1)
        return concat @ self.w_o

    def forward(self, q_state, k_state, v_state):
        return self._combine(self.attention_weights(q_state, k_state), v_state)

    def forward_transposed(self, z_dec, z_enc):
        """Transposed-score reading: the decoder-side key projection builds
        the score rows, encoder-side query/value projections fill the
        key/value roles."""
        k = torch.einsum("bsm,hmn->bhsn", z_dec, self.w_k)
        q = torch.einsum("bsm,hmn->bhsn", z_enc, self.w_q)
        scores = torch.einsum("bhsn,bhtn->bhst", k, q) / math.sqrt(self.n_model)
        return self._combine(torch.softmax(scores, dim=-1), z_enc)


class FeedForward(nn.Module):
    def __init__(self, n_model: int, widen: int = 4):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(n_model, widen * n_model, dtype=DTYPE),
            nn.ReLU(),
            nn.Linear(widen * n_model, n_model, dtype=DTYPE),
        )

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, n_model: int, n_heads: int):
        super().__init__()
        self.attn = MultiHeadAttention(n_model, n_heads)
        self.ffn = FeedForward(n_model)

    def forward(self, z):
        return z + self.ffn(self.attn(z, z, z))


class DecoderLayer(nn.Module):
    """Self-attention, cross-attention to the encoder state, feed-forward,
    each with a residual connection.

    `standard` orientation: queries from the decoder, keys/values from the
    encoder.  `paper` orientation keeps the key projection on the decoder
    side and the query/value projections on the encoder side, reading the
    score matrix transposed so the shapes compose.
    """

    def __init__(self, n_model: int, n_heads: int, orientation: str):
        super().__init__()
        self.orientation = orientation
        self.self_attn = MultiHeadAttention(n_model, n_heads)
        self.cross_attn = MultiHeadAttention(n_model, n_heads)
        self.ffn = FeedForward(n_model)

    def forward(self, z_dec, z_enc):
        z_dec = z_dec + self.self_attn(z_dec, z_dec, z_dec)
        if self.orientation == "standard":
            cross = self.cross_attn(z_dec, z_enc, z_enc)
        else:
            # decoder-side W^K produces the row vectors the scores are built
            # from, encoder-side W^Q/W^V supply the key/value roles
            cross = self.cross_attn.forward_transposed(z_dec, z_enc)
        z_dec = z_dec + cross
        return z_dec + self.ffn(z_dec)


class DualParameterTransformer(nn.Module):
    """CSI sequence in, raw [x_end | spacings | lambda | mu] out."""

    def __init__(self, config: TransformerConfig):
        super().__init__()
        self.config = config
        n_model = config.n_model
        self.embed = nn.Parameter(torch.randn(n_model, dtype=DTYPE)
                                  / math.sqrt(n_model))
        self.register_buffer("pe_enc",
                             sinusoidal_positions(config.s_enc, n_model))
        self.register_buffer("pe_dec",
                             sinusoidal_positions(config.s_dec, n_model))
        self.dec_init = nn.Parameter(torch.randn(config.s_dec, n_model,
                                                 dtype=DTYPE)
                                     / math.sqrt(n_model))
        self.encoder = nn.ModuleList(
            EncoderLayer(n_model, config.n_heads)
            for _ in range(config.n_enc_layers))
        self.decoder = nn.ModuleList(
            DecoderLayer(n_model, config.n_heads,
                         config.cross_attention_orientation)
            for _ in range(config.n_dec_layers))
        self.head = nn.Linear(n_model, 1, dtype=DTYPE)

    def embed_input(self, z: torch.Tensor) -> torch.Tensor:
        """(B, 2K) coordinates -> (B, 2K, n_model) token embeddings."""
        return z[:, :, None] * self.embed[None, None, :] + self.pe_enc[None]

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        """(B, 2K) -> (B, S_dec) raw parameter values."""
        z_enc = self.embed_input(z)
        for layer in self.encoder:
            z_enc = layer(z_enc)
        z_dec = self.dec_init[None] + self.pe_dec[None]
        z_dec = z_dec.expand(z.shape[0], -1, -1)
        for layer in self.decoder:
            z_dec = layer(z_dec, z_enc)
        return self.head(z_dec)[:, :, 0]

    def split_raw(self, raw: torch.Tensor):
        """(B, S_dec) -> raw (x_end, spacings, lambda, mu) slices."""
        cfg = self.config
        n, l, k = cfg.n_waveguides, cfg.pas_per_waveguide, cfg.n_users
        x_end = raw[:, :n]
        omega = raw[:, n:n + n * l].reshape(-1, n, l)
        lam = raw[:, n + n * l:n + n * l + k]
        mu = raw[:, n + n * l + k:]
        return x_end, omega, lam, mu
