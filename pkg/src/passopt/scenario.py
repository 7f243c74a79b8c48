"""Physical configuration of the waveguide-fed pinching-antenna downlink.

A Scenario bundles the immutable geometry and radio constants: N waveguides
stretched along the x-axis at height h, each carrying L movable radiating
elements (PAs), serving K single-antenna ground users inside an
span_x x span_y rectangle.  Placement holds the per-waveguide PA
x-coordinates, TransmitBeam the digital precoder applied at the feeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s; keeps the 30 GHz <-> 1 cm wavelength pairing exact


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts) + 30.0


@dataclass(frozen=True)
class Scenario:
    """Immutable system description. All lengths in meters, powers in watts."""

    n_waveguides: int
    n_users: int
    pas_per_waveguide: int
    span_x: float
    span_y: float
    pass_height: float
    carrier_freq: float
    refractive_index: float
    max_power: float
    noise_power: float
    min_spacing: float
    waveguide_y: np.ndarray          # (N,) y-coordinate of each waveguide
    user_positions: np.ndarray       # (K, 2) ground-plane (x, y), z = 0
    beta_convention: str = "paper_linear"

    def __post_init__(self):
        object.__setattr__(self, "waveguide_y", np.asarray(self.waveguide_y, dtype=float))
        object.__setattr__(self, "user_positions", np.asarray(self.user_positions, dtype=float))
        if self.n_waveguides != self.n_users:
            raise ValueError("multiplexing requires one waveguide per user (N = K)")
        if self.pas_per_waveguide < 1:
            raise ValueError("need at least one PA per waveguide")
        if self.span_x <= 0 or self.span_y <= 0:
            raise ValueError("deployment spans must be positive")
        if self.max_power <= 0 or self.noise_power <= 0:
            raise ValueError("power and noise must be positive")
        if self.min_spacing <= 0:
            raise ValueError("min_spacing must be positive")
        if self.pas_per_waveguide * self.min_spacing > self.span_x:
            raise ValueError("waveguide too short for the requested PA count/spacing")
        if self.beta_convention not in ("paper_linear", "squared"):
            raise ValueError(f"unknown beta_convention {self.beta_convention!r}")
        wy = self.waveguide_y
        if wy.shape != (self.n_waveguides,):
            raise ValueError("waveguide_y must have one entry per waveguide")
        if np.any(np.diff(wy) <= 0):
            raise ValueError("waveguide_y must be strictly increasing")
        if wy[0] < 0 or wy[-1] > self.span_y:
            raise ValueError("waveguide_y must lie in [0, span_y]")
        up = self.user_positions
        if up.shape != (self.n_users, 2):
            raise ValueError("user_positions must be (K, 2)")
        if np.any(up[:, 0] < 0) or np.any(up[:, 0] > self.span_x):
            raise ValueError("user x-coordinates must lie in [0, span_x]")
        if np.any(up[:, 1] < 0) or np.any(up[:, 1] > self.span_y):
            raise ValueError("user y-coordinates must lie in [0, span_y]")
        self.waveguide_y.setflags(write=False)
        self.user_positions.setflags(write=False)

    # -- derived radio constants ------------------------------------------

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def guided_wavelength(self) -> float:
        return self.wavelength / self.refractive_index

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def path_gain_beta(self) -> float:
        beta = SPEED_OF_LIGHT / (4.0 * np.pi * self.carrier_freq)
        if self.beta_convention == "squared":
            beta = beta**2
        return beta

    @property
    def pinch_amplitude(self) -> float:
        """Per-PA amplitude factor sqrt(beta / L)."""
        return np.sqrt(self.path_gain_beta / self.pas_per_waveguide)

    @property
    def n_pas_total(self) -> int:
        return self.n_waveguides * self.pas_per_waveguide

    @property
    def feed_points(self) -> np.ndarray:
        """(N, 3) feed coordinates [0, y_n, h]."""
        n = self.n_waveguides
        pts = np.zeros((n, 3))
        pts[:, 1] = self.waveguide_y
        pts[:, 2] = self.pass_height
        return pts

    @property
    def transverse_offsets(self) -> np.ndarray:
        """(K, N) distance from each user to each waveguide line (y/z part only).

        Constant along a waveguide: only the PA x-coordinate is adjustable.
        """
        dy = self.waveguide_y[None, :] - self.user_positions[:, 1][:, None]
        return np.sqrt(dy**2 + self.pass_height**2)


@dataclass
class Placement:
    """PA x-coordinates, one row per waveguide: x[n, l]."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("placement must be an (N, L) array")

    def copy(self) -> "Placement":
        return Placement(self.x.copy())


@dataclass
class TransmitBeam:
    """Digital precoder: column k of d (N x K) serves user k."""

    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=complex)
        if self.d.ndim != 2:
            raise ValueError("beam must be an (N, K) matrix")

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.d) ** 2))

    def copy(self) -> "TransmitBeam":
        return TransmitBeam(self.d.copy())


@dataclass
class Violation:
    constraint: str
    margin: float
    detail: str


def check_feasibility(scenario: Scenario, placement: Placement,
                      beam: TransmitBeam | None = None,
                      tol: float = 1e-9) -> list[Violation]:
    """Report every violated constraint with its margin; empty means feasible.

    Margins are absolute (meters for spacing/range, watts for power); a
    constraint holding within `tol` is not reported.
    """
    out = []
    x = placement.x
    if x.shape != (scenario.n_waveguides, scenario.pas_per_waveguide):
        raise ValueError("placement shape does not match scenario")
    gaps = np.diff(x, axis=1)
    short = scenario.min_spacing - gaps
    for n, l in zip(*np.nonzero(short > tol)):
        out.append(Violation("C1", float(short[n, l]),
                             f"spacing x[{n},{l + 1}]-x[{n},{l}] below minimum"))
    low = -x
    for n, l in zip(*np.nonzero(low > tol)):
        out.append(Violation("C2", float(low[n, l]), f"x[{n},{l}] below feed point"))
    high = x - scenario.span_x
    for n, l in zip(*np.nonzero(high > tol)):
        out.append(Violation("C2", float(high[n, l]), f"x[{n},{l}] beyond waveguide end"))
    if beam is not None:
        excess = beam.total_power - scenario.max_power
        if excess > tol:
            out.append(Violation("C3", float(excess), "total transmit power above budget"))
    return out


def default_waveguide_y(n_waveguides: int, span_y: float) -> np.ndarray:
    """Waveguides centered on uniform lanes of width span_y / N."""
    lane = span_y / n_waveguides
    return (np.arange(n_waveguides) + 0.5) * lane


def make_scenario(user_positions,
                  pas_per_waveguide: int = 8,
                  span_x: float = 20.0,
                  span_y: float = 10.0,
                  pass_height: float = 2.5,
                  carrier_freq: float = 30e9,
                  refractive_index: float = 1.4,
                  max_power_dbm: float = 10.0,
                  noise_power_dbm: float = -90.0,
                  min_spacing: float | None = None,
                  waveguide_y=None,
                  beta_convention: str = "paper_linear") -> Scenario:
    """Scenario with the standard simulation constants; N is set to K."""
    user_positions = np.asarray(user_positions, dtype=float)
    k = user_positions.shape[0]
    if min_spacing is None:
        min_spacing = 0.5 * SPEED_OF_LIGHT / carrier_freq
    if waveguide_y is None:
        waveguide_y = default_waveguide_y(k, span_y)
    return Scenario(
        n_waveguides=k,
        n_users=k,
        pas_per_waveguide=pas_per_waveguide,
        span_x=span_x,
        span_y=span_y,
        pass_height=pass_height,
        carrier_freq=carrier_freq,
        refractive_index=refractive_index,
        max_power=dbm_to_watts(max_power_dbm),
        noise_power=dbm_to_watts(noise_power_dbm),
        min_spacing=min_spacing,
        waveguide_y=waveguide_y,
        user_positions=user_positions,
        beta_convention=beta_convention,
    )
