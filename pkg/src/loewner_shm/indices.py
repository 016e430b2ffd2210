"""Damage-sensitive features from a baseline and a candidate modal set."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateNormalizationError, DimensionError, UndefinedIndexError, UndefinedMacError
from .modes import ModalSet
from .serialization import dump_json, fmt_float


def mac(a, b) -> float:
    """Modal assurance criterion ``|aᴴb|² / ((aᴴa)(bᴴb))`` for complex vectors."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size or a.size == 0:
        raise DimensionError(f"MAC needs equal nonzero lengths, got {a.size} and {b.size}")
    na = np.vdot(a, a).real
    nb = np.vdot(b, b).real
    if na == 0.0 or nb == 0.0:
        raise UndefinedMacError("MAC is undefined for a zero vector")
    # vdot(b, a) is the exact conjugate of vdot(a, b), so the value is symmetric bit-for-bit
    cross = abs(np.vdot(a, b)) ** 2
    return float(min(1.0, cross / (na * nb)))


def mac_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """MAC between every column of ``A`` and every column of ``B``."""
    return np.array([[mac(A[:, i], B[:, j]) for j in range(B.shape[1])] for i in range(A.shape[1])]).reshape(
        A.shape[1], B.shape[1]
    )


@dataclass(frozen=True)
class ModePairing:
    pairs: tuple[tuple[int, int, float], ...]
    unpaired_baseline: tuple[int, ...]
    unpaired_candidate: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def baseline_indices(self) -> list[int]:
        return [i for i, _, _ in self.pairs]

    @property
    def candidate_indices(self) -> list[int]:
        return [j for _, j, _ in self.pairs]


def pair_modes(baseline: ModalSet, candidate: ModalSet, f_gate_rel: float = 0.20) -> ModePairing:
    """Greedy one-to-one pairing by descending MAC, gated on relative frequency shift.

    Pairs are returned in baseline frequency order.
    """
    if not len(baseline) or not len(candidate):
        raise UndefinedIndexError("pairing needs two nonempty modal sets")
    M = mac_matrix(baseline.shapes, candidate.shapes)
    fb, fc = baseline.frequencies, candidate.frequencies
    order = sorted(((i, j) for i in range(len(fb)) for j in range(len(fc))), key=lambda ij: (-M[ij], abs(fc[ij[1]] - fb[ij[0]]), ij))
    used_b: set[int] = set()
    used_c: set[int] = set()
    pairs = []
    for i, j in order:
        if i in used_b or j in used_c:
            continue
        if abs(fc[j] - fb[i]) / fb[i] > f_gate_rel:
            continue
        used_b.add(i)
        used_c.add(j)
        pairs.append((i, j, float(M[i, j])))
    pairs.sort()
    return ModePairing(
        tuple(pairs),
        tuple(i for i in range(len(fb)) if i not in used_b),
        tuple(j for j in range(len(fc)) if j not in used_c),
    )


def _require_pairs(pairing: ModePairing) -> None:
    if not pairing.pairs:
        raise UndefinedIndexError("no paired modes")


def mtmac(baseline: ModalSet, candidate: ModalSet, pairing: ModePairing) -> float:
    """Complement of the modified total MAC over the paired modes."""
    _require_pairs(pairing)
    prod = 1.0
    for i, j, _ in pairing.pairs:
        wE, wN = baseline[i].omega, candidate[j].omega
        prod *= mac(baseline[i].phi, candidate[j].phi) / (1.0 + abs(wN - wE) / (wN + wE))
    return float(1.0 - prod)


def _phase_align(ref: np.ndarray, x: np.ndarray) -> np.ndarray:
    # rotation maximizing Re(refᴴ x·e^{iθ})
    c = np.vdot(x, ref)
    return x if c == 0 else x * (c / abs(c))


def comac(baseline: ModalSet, candidate: ModalSet, pairing: ModePairing) -> np.ndarray:
    """Coordinate MAC per DoF across the paired shapes.

    Each candidate shape is phase-aligned to its baseline partner, then
    component magnitudes enter the classical formula.  A DoF that moves in
    one state but not the other scores 0; one that never moves in either
    is undefined.
    """
    _require_pairs(pairing)
    E = np.column_stack([np.abs(baseline[i].phi) for i, _, _ in pairing.pairs])
    N = np.column_stack(
        [np.abs(_phase_align(baseline[i].phi, candidate[j].phi)) for i, j, _ in pairing.pairs]
    )
    if E.shape != N.shape:
        raise DimensionError(f"shape lengths differ: {E.shape[0]} and {N.shape[0]}")
    num = np.sum(E * N, axis=1) ** 2
    eE, eN = np.sum(E**2, axis=1), np.sum(N**2, axis=1)
    den = eE * eN
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / den, np.nan)
    # motion in one state and none in the other is no correlation at all
    out[(den == 0) & ((eE > 0) != (eN > 0))] = 0.0
    if np.isnan(out).any():
        raise UndefinedIndexError(f"COMAC undefined at DoFs {np.nonzero(np.isnan(out))[0].tolist()}: zero in every shape")
    return np.minimum(out, 1.0)


def scaled_comac(c) -> np.ndarray:
    """Min-max normalized COMAC deviation; 1 marks the largest deviation."""
    c = np.asarray(c, dtype=float)
    d = 1.0 - c
    span = d.max() - d.min()
    if span == 0.0:
        raise DegenerateNormalizationError("all COMAC entries are equal")
    return (d - d.min()) / span


def delta_omega_pct(baseline: ModalSet, candidate: ModalSet, pairing: ModePairing) -> np.ndarray:
    """Signed percentage frequency change per pair, baseline as reference."""
    return np.array([100.0 * (candidate[j].f_hz - baseline[i].f_hz) / baseline[i].f_hz for i, j, _ in pairing.pairs])


@dataclass(frozen=True, eq=False)
class DamageReport:
    case_id: str
    pairing: ModePairing
    mac_diag: np.ndarray
    mtmac: float
    comac: np.ndarray
    scaled_comac: np.ndarray | None
    delta_omega_pct: np.ndarray
    channels: tuple[str, ...] | None = None

    @property
    def n_pairs(self) -> int:
        return len(self.pairing.pairs)

    @property
    def min_comac_dof(self) -> int:
        return int(np.argmin(self.comac))

    def min_comac_label(self) -> str:
        k = self.min_comac_dof
        return self.channels[k] if self.channels else str(k)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "n_pairs": self.n_pairs,
            "pairs": [[i, j] for i, j, _ in self.pairing.pairs],
            "unpaired_baseline": list(self.pairing.unpaired_baseline),
            "unpaired_candidate": list(self.pairing.unpaired_candidate),
            "mac_diag": self.mac_diag.tolist(),
            "mtmac": self.mtmac,
            "comac": self.comac.tolist(),
            "scaled_comac": None if self.scaled_comac is None else self.scaled_comac.tolist(),
            "delta_omega_pct": self.delta_omega_pct.tolist(),
            "channels": None if self.channels is None else list(self.channels),
        }

    def to_json(self) -> str:
        return dump_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DamageReport":
        mac_diag = np.asarray(d["mac_diag"], float)
        pairing = ModePairing(
            tuple((int(i), int(j), float(m)) for (i, j), m in zip(d["pairs"], mac_diag)),
            tuple(d["unpaired_baseline"]),
            tuple(d["unpaired_candidate"]),
        )
        sc = d.get("scaled_comac")
        ch = d.get("channels")
        return cls(
            d["case_id"],
            pairing,
            mac_diag,
            float(d["mtmac"]),
            np.asarray(d["comac"], float),
            None if sc is None else np.asarray(sc, float),
            np.asarray(d["delta_omega_pct"], float),
            None if ch is None else tuple(ch),
        )

    @classmethod
    def from_json(cls, text: str) -> "DamageReport":
        return cls.from_dict(json.loads(text))


def damage_report(case_id: str, baseline: ModalSet, candidate: ModalSet, f_gate_rel: float = 0.20) -> DamageReport:
    """All indices of ``candidate`` against ``baseline``.

    ``scaled_comac`` is ``None`` when every COMAC entry is equal (for
    instance a set compared with itself).
    """
    pairing = pair_modes(baseline, candidate, f_gate_rel)
    _require_pairs(pairing)
    c = comac(baseline, candidate, pairing)
    try:
        sc = scaled_comac(c)
    except DegenerateNormalizationError:
        sc = None
    return DamageReport(
        case_id,
        pairing,
        np.array([m for _, _, m in pairing.pairs]),
        mtmac(baseline, candidate, pairing),
        c,
        sc,
        delta_omega_pct(baseline, candidate, pairing),
        baseline.channels,
    )


def combined_csv(reports: Sequence[DamageReport]) -> str:
    lines = ["case_id,mtmac,n_pairs,min_comac_dof,min_comac"]
    for r in reports:
        lines.append(f"{r.case_id},{fmt_float(r.mtmac)},{r.n_pairs},{r.min_comac_label()},{fmt_float(float(r.comac.min()))}")
    return "\n".join(lines) + "\n"
