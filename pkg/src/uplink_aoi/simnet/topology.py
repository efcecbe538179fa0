"""Spatial realisations on a square torus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import NumericError
from .config import NetworkConfig, substream

MAX_DRAWS = 1_000_000


def torus_distance(a: np.ndarray, b: np.ndarray, side: float) -> np.ndarray:
    """Wrap-around Euclidean distance between broadcastable point arrays."""
    diff = np.abs(a - b) % side
    diff = np.minimum(diff, side - diff)
    return np.sqrt((diff ** 2).sum(axis=-1))


@dataclass(frozen=True)
class SpatialRealization:
    side: float
    bs_positions: np.ndarray
    device_positions: np.ndarray
    serving: np.ndarray
    link_distance: np.ndarray
    tx_power_factor: np.ndarray

    @property
    def n_devices(self) -> int:
        return len(self.device_positions)

    def distances(self) -> np.ndarray:
        """``out[i, j]``: distance from device j to base station i."""
        return torus_distance(self.bs_positions[:, None, :], self.device_positions[None, :, :],
                              self.side)

    def relative_gain(self, eta: float) -> np.ndarray:
        """Interference-to-signal gain ratios without fading.

        ``out[i, j]`` is device j's mean received power at device i's serving
        station divided by device i's own mean received power; the diagonal
        is zero.
        """
        dist = self.distances()[self.serving]
        rx = self.tx_power_factor[None, :] * dist ** (-eta)
        own = self.tx_power_factor * self.link_distance ** (-eta)
        out = rx / own[:, None]
        np.fill_diagonal(out, 0.0)
        return out

    def translated(self, shift) -> SpatialRealization:
        shift = np.asarray(shift, dtype=float)
        return SpatialRealization(self.side, (self.bs_positions + shift) % self.side,
                                  (self.device_positions + shift) % self.side, self.serving,
                                  self.link_distance, self.tx_power_factor)


def _build(side, bs, dev, eta, eps):
    serving = np.arange(len(bs))
    r = torus_distance(dev, bs[serving], side)
    return SpatialRealization(side, bs, dev, serving, r, r ** (eta * eps))


def generate_topology(cfg: NetworkConfig, seed: int | None = None, realization: int = 0,
                      n_bs: int | None = None) -> SpatialRealization:
    """Poisson base stations and one uniformly placed device per Voronoi cell.

    Devices are placed by rejection: uniform points on the square are
    assigned to their torus-nearest station and the first hit per cell is
    kept.  `n_bs` forces the station count instead of drawing it.
    """
    rng = substream(cfg.seed if seed is None else seed, realization, "topology")
    side = cfg.area_side
    if n_bs is None:
        n_bs = 0
        while n_bs == 0:
            n_bs = int(rng.poisson(cfg.bs_density * cfg.area))
    bs = rng.uniform(0.0, side, size=(n_bs, 2))
    tree = cKDTree(bs, boxsize=side)
    dev = np.full((n_bs, 2), np.nan)
    filled = np.zeros(n_bs, dtype=bool)
    draws = 0
    batch = max(256, 8 * n_bs)
    while not filled.all():
        if draws >= MAX_DRAWS:
            raise NumericError("rejection placement exceeded its draw budget",
                               unfilled=int((~filled).sum()), draws=draws)
        pts = rng.uniform(0.0, side, size=(batch, 2))
        _, idx = tree.query(pts)
        draws += batch
        first = np.unique(idx, return_index=True)
        for cell, k in zip(*first):
            if not filled[cell]:
                dev[cell] = pts[k]
                filled[cell] = True
    return _build(side, bs, dev, cfg.eta, cfg.eps)


def realization_from_positions(bs_positions, device_positions, side: float, eta: float,
                               eps: float) -> SpatialRealization:
    """Realisation with device i served by station i (positions taken as given)."""
    return _build(side, np.asarray(bs_positions, float), np.asarray(device_positions, float),
                  eta, eps)
