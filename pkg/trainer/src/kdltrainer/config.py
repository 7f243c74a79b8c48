"""Model configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class TransformerConfig:
    n_users: int
    n_waveguides: int
    pas_per_waveguide: int
    n_model: int = 128
    n_heads: int = 4
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    cross_attention_orientation: str = "standard"   # or "transposed"

    def __post_init__(self):
        if self.n_model % self.n_heads != 0:
            raise ValueError("n_model must be divisible by n_heads")
        if self.cross_attention_orientation not in ("standard", "transposed"):
            raise ValueError("orientation must be 'standard' or 'paper'")

    @property
    def s_enc(self) -> int:
        return 2 * self.n_users

    @property
    def s_dec(self) -> int:
        # output slices: x_end (N) | spacings (N*L) | lambda (K) | mu (K)
        return (self.n_waveguides
                + self.n_waveguides * self.pas_per_waveguide
                + 2 * self.n_users)

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "n_waveguides": self.n_waveguides,
            "pas_per_waveguide": self.pas_per_waveguide,
            "n_model": self.n_model,
            "n_heads": self.n_heads,
            "n_enc_layers": self.n_enc_layers,
            "n_dec_layers": self.n_dec_layers,
            "cross_attention_orientation": self.cross_attention_orientation,
        }
