"""Spectral phase masks: the simulated pulse shaper and delay line."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import ConfigError, FrequencyGrid, SpectralField, wavelength_to_omega


class PhaseMask:
    """Base class. Subclasses return the phase (rad) per grid bin."""

    def phase(self, grid: FrequencyGrid) -> np.ndarray:
        raise NotImplementedError

    def factor(self, grid: FrequencyGrid) -> np.ndarray:
        ph = self.phase(grid)
        if not np.all(np.isfinite(ph)):
            raise ConfigError([("mask", "non-finite phase values")])
        return np.exp(1j * ph)

    def then(self, other: "PhaseMask") -> "Compose":
        return Compose((self, other))


@dataclass(frozen=True)
class Constant(PhaseMask):
    phi: float = 0.0

    def phase(self, grid):
        return np.full(grid.n_bins, float(self.phi))


IDENTITY = Constant(0.0)


@dataclass(frozen=True)
class Delay(PhaseMask):
    """Phase w * tau: shifts the temporal envelope by +tau."""

    tau: float

    def phase(self, grid):
        return grid.omegas * self.tau


@dataclass(frozen=True)
class Dispersion(PhaseMask):
    gdd: float  # s^2
    omega0: float

    def phase(self, grid):
        return 0.5 * self.gdd * (grid.omegas - self.omega0) ** 2


@dataclass(frozen=True)
class SquareWave(PhaseMask):
    """0 / magnitude alternating in frequency; a rising edge sits at ``offset``."""

    magnitude: float
    period: float
    offset: float
    duty: float = 0.5

    def phase(self, grid):
        if not self.period >= 4 * grid.bin_width:
            raise ConfigError([("mask.period", f"square-wave period {self.period:.4g} rad/s is "
                                               f"below 4 bin widths ({4 * grid.bin_width:.4g})")])
        frac = np.mod((grid.omegas - self.offset) / self.period, 1.0)
        return np.where(frac < self.duty, float(self.magnitude), 0.0)


def square_wave_mask(magnitude, period, offset, grid: FrequencyGrid | None = None) -> SquareWave:
    mask = SquareWave(float(magnitude), float(period), float(offset))
    if grid is not None:
        mask.phase(grid)  # resolvability check
    return mask


@dataclass(frozen=True, eq=False)
class Tabulated(PhaseMask):
    """Phase breakpoints (rad/s -> rad); each bin takes the nearest breakpoint's phase."""

    omegas: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        p = np.asarray(self.phases, dtype=float)
        if w.shape != p.shape or w.ndim != 1 or w.size == 0:
            raise ConfigError([("mask", "tabulated mask needs matching 1-d breakpoints")])
        order = np.argsort(w)
        object.__setattr__(self, "omegas", w[order])
        object.__setattr__(self, "phases", p[order])

    def phase(self, grid):
        w = self.omegas
        if len(w) == 1:
            return np.full(grid.n_bins, self.phases[0])
        idx = np.clip(np.searchsorted(w, grid.omegas), 1, len(w) - 1)
        take_left = grid.omegas - w[idx - 1] <= w[idx] - grid.omegas
        return self.phases[np.where(take_left, idx - 1, idx)]


def load_tabulated(path) -> Tabulated:
    """Read a two-column text file ``wavelength_nm phase_rad`` (comments with #)."""
    lines = Path(path).read_text().replace(",", " ").splitlines()
    data = np.loadtxt(lines, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ConfigError([("mask.file", "expected two columns: wavelength_nm, phase_rad")])
    return Tabulated(wavelength_to_omega(data[:, 0]), data[:, 1])


@dataclass(frozen=True)
class Compose(PhaseMask):
    """Sum of phases; nested composites are flattened, so grouping never matters."""

    masks: tuple = ()

    def __post_init__(self):
        flat = []
        for m in self.masks:
            flat.extend(m.masks if isinstance(m, Compose) else (m,))
        object.__setattr__(self, "masks", tuple(flat))

    def phase(self, grid):
        if not self.masks:
            return np.zeros(grid.n_bins)
        total = self.masks[0].phase(grid)
        for m in self.masks[1:]:
            total = total + m.phase(grid)
        return total


def apply_mask(fld: SpectralField, mask: PhaseMask) -> SpectralField:
    return SpectralField(fld.grid, fld.amplitude * mask.factor(fld.grid))
