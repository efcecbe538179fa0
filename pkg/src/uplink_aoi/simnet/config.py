from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ParameterError

FADING_MODES = ("explicit", "marginal")
STREAM_PURPOSES = ("topology", "arrivals", "fading")


@dataclass(frozen=True)
class NetworkConfig:
    """Simulation parameters.  Lengths in km, `theta` linear, `rho_dbm` in dBm.

    `rho_dbm` cancels from the SIR and only scales the reported transmit
    powers.  `n_slots_max` is both the warm-up cap and the length of the
    measurement phase.
    """

    alpha: float
    theta: float
    eta: float = 4.0
    eps: float = 1.0
    bs_density: float = 1.0
    area_side: float = 10.0
    rho_dbm: float = -90.0
    n_slots_max: int = 20_000
    warmup_window: int = 1_000
    steady_tol: float = 1e-3
    seed: int = 0
    n_realizations: int = 20
    min_attempts: int = 50
    fading: str = "explicit"

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.theta > 0:
            raise ParameterError("theta must be positive (linear scale)")
        if not self.eta > 2:
            raise ParameterError("path-loss exponent must exceed 2")
        if not 0 < self.eps <= 1:
            raise ParameterError("compensation factor must lie in (0, 1]")
        if not (self.bs_density > 0 and self.area_side > 0):
            raise ParameterError("density and area side must be positive")
        if self.area_side ** 2 * self.bs_density < 20:
            raise ParameterError("area_side**2 * bs_density must be at least 20 cells")
        for name in ("n_slots_max", "warmup_window", "n_realizations"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(f"{name} must be a positive integer")
        if not self.steady_tol > 0:
            raise ParameterError("steady_tol must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.fading not in FADING_MODES:
            raise ParameterError(f"fading must be one of {FADING_MODES}")

    @property
    def area(self) -> float:
        return self.area_side ** 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> NetworkConfig:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def substream(seed: int, realization: int, purpose: str) -> np.random.Generator:
    """Independent generator for one (realization, purpose) pair."""
    key = (int(realization), STREAM_PURPOSES.index(purpose))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
