"""Modal parameter containers shared by identification, simulation and indices."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from .serialization import dump_json


def normalize_shape(phi) -> np.ndarray:
    """Return ``phi`` rotated so its largest-magnitude entry is real positive, at unit norm."""
    phi = np.asarray(phi, dtype=complex).ravel()
    norm = np.linalg.norm(phi)
    if norm == 0.0:
        raise ValueError("cannot normalize a zero mode shape")
    k = int(np.argmax(np.abs(phi)))
    phase = phi[k] / abs(phi[k])
    return phi / (phase * norm)


def pole_to_modal(pole: complex) -> tuple[float, float]:
    """Natural frequency [Hz] and damping ratio of a continuous-time pole."""
    mag = abs(pole)
    return mag / (2.0 * math.pi), -pole.real / mag


@dataclass(frozen=True, eq=False)
class Mode:
    """A single mode: natural frequency in Hz, viscous damping ratio, complex shape."""

    f_hz: float
    zeta: float
    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=complex).ravel()
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "f_hz", float(self.f_hz))
        object.__setattr__(self, "zeta", float(self.zeta))

    @classmethod
    def from_pole(cls, pole: complex, phi) -> "Mode":
        f_hz, zeta = pole_to_modal(complex(pole))
        return cls(f_hz, zeta, phi)

    @property
    def omega(self) -> float:
        """Natural circular frequency [rad/s]."""
        return 2.0 * math.pi * self.f_hz

    @property
    def pole(self) -> complex:
        w = self.omega
        return complex(-self.zeta * w, w * math.sqrt(max(0.0, 1.0 - self.zeta**2)))


@dataclass(frozen=True, eq=False)
class ModalSet:
    """Modes sorted by ascending frequency, with the band and provenance they came from.

    ``order`` and ``seed`` are ``None`` for sets that were not produced by a
    single identification run (analytical or consolidated results).
    """

    modes: tuple[Mode, ...]
    band: tuple[float, float]
    order: int | None = None
    seed: int | None = None
    channels: tuple[str, ...] | None = None

    def __post_init__(self):
        modes = tuple(sorted(self.modes, key=lambda m: m.f_hz))
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))
        if self.channels is not None:
            object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
            for m in modes:
                if m.phi.size != len(self.channels):
                    raise ValueError("mode shape length does not match channel count")

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self.modes)

    def __getitem__(self, i) -> Mode:
        return self.modes[i]

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.f_hz for m in self.modes])

    @property
    def dampings(self) -> np.ndarray:
        return np.array([m.zeta for m in self.modes])

    @property
    def shapes(self) -> np.ndarray:
        """Mode shapes as columns, ``(p, n_modes)``."""
        if not self.modes:
            p = 0 if self.channels is None else len(self.channels)
            return np.zeros((p, 0), dtype=complex)
        return np.column_stack([m.phi for m in self.modes])

    def with_(self, **changes) -> "ModalSet":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "order": self.order,
            "seed": self.seed,
            "band": list(self.band),
            "modes": [
                {
                    "f_hz": m.f_hz,
                    "zeta": m.zeta,
                    "phi_re": m.phi.real.tolist(),
                    "phi_im": m.phi.imag.tolist(),
                }
                for m in self.modes
            ],
        }
        if self.channels is not None:
            d["channels"] = list(self.channels)
        return d

    def to_json(self) -> str:
        return dump_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ModalSet":
        modes = tuple(
            Mode(m["f_hz"], m["zeta"], np.asarray(m["phi_re"], float) + 1j * np.asarray(m["phi_im"], float))
            for m in d["modes"]
        )
        channels = d.get("channels")
        return cls(
            modes=modes,
            band=tuple(d["band"]),
            order=d.get("order"),
            seed=d.get("seed"),
            channels=None if channels is None else tuple(channels),
        )

    @classmethod
    def from_json(cls, text: str) -> "ModalSet":
        return cls.from_dict(json.loads(text))


def empty_modal_set(band: Sequence[float], order=None, seed=None, channels=None) -> ModalSet:
    return ModalSet(modes=(), band=tuple(band), order=order, seed=seed, channels=channels)
