"""Spread-spectrum link keyed on the signal beam, decoded by coherent TPA with the idler.

Protocol (our construction; only the delay-keying idea comes from the physics):

* slot 0 is a pilot, every channel sends bit 0 in it;
* slot s >= 1 carries bit s - 1; each slot uses fresh realizations;
* channel c delays its copy of the signal by ``tau_c`` and applies a 0 / pi
  phase key; channels sharing the beam are recombined with 1/sqrt(C) amplitude;
* the receiver re-delays the signal by ``-tau_rx``, estimates the mean
  sum-frequency amplitude at the pump bin for every slot and projects it on
  the pilot amplitude.  Negative projection decodes as 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detector import TransitionSpec, coherent_amplitude
from .shaper import Constant, Delay
from .source import (DownConvertedPair, PumpSpec, SourceSpec, conjugate_idler, draw_signal,
                     realization_rng, sample_pump)
from .spectral import SpectralField


@dataclass(frozen=True)
class ChannelSpec:
    delay: float  # s
    realizations_per_bit: int = 64

    def __post_init__(self):
        if self.realizations_per_bit < 2:
            raise ValueError("bit period must span at least 2 realizations")


@dataclass(frozen=True, eq=False)
class Transmission:
    """Lazily generated slots of (keyed signal, untouched idler) pairs."""

    src: SourceSpec
    pump: PumpSpec
    channels: tuple
    bits: tuple  # one bit tuple per channel
    seed: int = 0

    def __post_init__(self):
        lengths = {len(b) for b in self.bits}
        if len(lengths) > 1:
            raise ValueError("all channels must carry the same number of bits")
        if len({c.realizations_per_bit for c in self.channels}) > 1:
            raise ValueError("channels must share the bit period")

    @property
    def n_bits(self) -> int:
        return len(self.bits[0]) if self.bits else 0

    @property
    def realizations_per_bit(self) -> int:
        return self.channels[0].realizations_per_bit

    def _key_factor(self, slot: int) -> np.ndarray:
        g = self.src.grid
        total = np.zeros(g.n_bins, dtype=complex)
        for ch, bits in zip(self.channels, self.bits):
            bit = 0 if slot == 0 else bits[slot - 1]
            total += Constant(np.pi if bit else 0.0).factor(g) * Delay(ch.delay).factor(g)
        return total / np.sqrt(len(self.channels))

    def slot_pairs(self, slot: int):
        """Pairs of slot ``slot`` (0 = pilot); the idler is the receiver's key."""
        key = self._key_factor(slot)
        for r in range(self.realizations_per_bit):
            rng = realization_rng(self.seed, slot, r)
            wp = sample_pump(self.pump, rng)
            signal = draw_signal(self.src, rng)
            idler = conjugate_idler(signal, wp)
            yield DownConvertedPair(SpectralField(signal.grid, signal.amplitude * key), idler, wp)

    def signal_slot(self, slot: int) -> np.ndarray:
        """Signal amplitudes of one slot, shape (realizations, bins): all an eavesdropper sees."""
        return np.array([p.signal.amplitude for p in self.slot_pairs(slot)])


def transmit(bits, channel: ChannelSpec, src: SourceSpec, pump: PumpSpec, seed: int = 0):
    return transmit_multi([(channel, bits)], src, pump, seed)


def transmit_multi(channel_bits, src: SourceSpec, pump: PumpSpec, seed: int = 0) -> Transmission:
    """Several channels sharing one signal/idler source, each with its own delay."""
    channels = tuple(c for c, _ in channel_bits)
    bits = tuple(tuple(int(b) for b in bs) for _, bs in channel_bits)
    for bs in bits:
        if any(b not in (0, 1) for b in bs):
            raise ValueError("bits must be 0 or 1")
    return Transmission(src, pump, channels, bits, seed)


@dataclass(frozen=True, eq=False)
class BitstreamResult:
    decoded: np.ndarray
    statistic: np.ndarray
    truth: np.ndarray
    coherent: np.ndarray = field(default=None)  # coherent TPA estimate per bit
    pilot_amplitude: complex = 0j

    @property
    def errors(self) -> int:
        return int(np.sum(self.decoded != self.truth))

    @property
    def ber(self) -> float:
        return self.errors / len(self.truth) if len(self.truth) else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("#schema=1 kind=ocdma\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bit_index", "statistic", "decision", "truth"])
            for i, (s, d, t) in enumerate(zip(self.statistic, self.decoded, self.truth)):
                w.writerow([i, repr(float(s)), int(d), int(t)])


def _slot_amplitude(tx: Transmission, slot: int, compensation: np.ndarray, masses):
    amps, weights = [], []
    for pair in tx.slot_pairs(slot):
        shaped = pair.with_fields(signal=SpectralField(pair.grid,
                                                       pair.signal.amplitude * compensation))
        amps.append(coherent_amplitude(shaped))
        weights.append(masses[pair.pump_index])
    return np.mean(amps), np.mean(weights)


def receive(tx: Transmission, channel: ChannelSpec, transition: TransitionSpec,
            channel_index: int = 0) -> BitstreamResult:
    """Decode the bits of ``tx.bits[channel_index]`` with a receiver set to ``channel.delay``.

    The idler of every pair (matched seeds) is the receiver's reference key.
    A delay mismatch leaves the statistic at the noise floor; that is reported,
    not raised.
    """
    g = tx.src.grid
    masses = transition.bin_masses(g.sum_grid())
    compensation = Delay(-channel.delay).factor(g)
    pilot, _ = _slot_amplitude(tx, 0, compensation, masses)
    stats, coherent = [], []
    for slot in range(1, tx.n_bits + 1):
        a, w = _slot_amplitude(tx, slot, compensation, masses)
        stats.append((a * np.conj(pilot)).real / abs(pilot) ** 2)
        coherent.append(abs(a) ** 2 * w)
    stats = np.array(stats)
    decoded = (stats < 0).astype(int)
    truth = np.array(tx.bits[channel_index], dtype=int)
    return BitstreamResult(decoded, stats, truth, np.array(coherent), complex(pilot))


def eavesdrop(tx: Transmission, channel_index: int = 0) -> BitstreamResult:
    """Best-effort signal-only decoder: correlate each slot's signal with the pilot's."""
    pilot = tx.signal_slot(0)
    stats = []
    for slot in range(1, tx.n_bits + 1):
        s = tx.signal_slot(slot)
        stats.append(np.sum(s * np.conj(pilot)).real)
    stats = np.array(stats)
    truth = np.array(tx.bits[channel_index], dtype=int)
    return BitstreamResult((stats < 0).astype(int), stats, truth)


def read_bits(path) -> list[int]:
    text = "".join(Path(path).read_text().split())
    if any(c not in "01" for c in text):
        raise ValueError(f"{path}: bitstream must contain only 0 and 1")
    return [int(c) for c in text]


def write_bits(path, bits):
    Path(path).write_text("".join(str(int(b)) for b in bits) + "\n")
