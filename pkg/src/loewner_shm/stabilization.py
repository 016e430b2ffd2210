"""Stabilization diagrams: model-order sweeps, pole stability flags, consolidation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateRealizationError, RankDeficientOrderError
from .frf import FrfDataset
from .indices import mac
from .loewner import DEFAULT_MAX_BINS, MIN_DAMPING, extract_modes, prepare_pencil, realize
from .modes import ModalSet, Mode, empty_modal_set
from .serialization import dump_json, fmt_float


class Flag(str, Enum):
    STABLE = "stable"
    UNSTABLE_FREQUENCY = "unstable-frequency"
    UNSTABLE_DAMPING = "unstable-damping"
    UNSTABLE_SHAPE = "unstable-shape"
    NEW = "new"


@dataclass(frozen=True)
class Tolerances:
    df_rel: float = 0.005
    dzeta_rel: float = 0.05
    mac_min: float = 0.95

    def __post_init__(self):
        if not (self.df_rel > 0 and self.dzeta_rel > 0 and self.mac_min > 0):
            raise ValueError("stability tolerances must be positive")

    def to_dict(self) -> dict:
        return {"df_rel": self.df_rel, "dzeta_rel": self.dzeta_rel, "mac_min": self.mac_min}


@dataclass(frozen=True)
class DiagramEntry:
    order: int
    modes: ModalSet
    flags: tuple[Flag, ...]
    # index of the matched previous-order mode for each stable flag, else None
    matches: tuple[int | None, ...]
    note: str | None = None


@dataclass(frozen=True)
class StabilizationDiagram:
    entries: tuple[DiagramEntry, ...]
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int | None = None
    band: tuple[float, float] | None = None

    def entry(self, order: int) -> DiagramEntry:
        for e in self.entries:
            if e.order == order:
                return e
        raise KeyError(order)

    def stable_counts(self) -> dict[int, int]:
        return {e.order: sum(f is Flag.STABLE for f in e.flags) for e in self.entries}

    def to_csv(self) -> str:
        lines = ["order,f_hz,zeta,flag"]
        for e in self.entries:
            for m, flag in zip(e.modes, e.flags):
                lines.append(f"{e.order},{fmt_float(m.f_hz)},{fmt_float(m.zeta)},{flag.value}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return dump_json(
            {
                "tolerances": self.tolerances.to_dict(),
                "seed": self.seed,
                "band": None if self.band is None else list(self.band),
                "entries": [
                    {
                        "order": e.order,
                        "note": e.note,
                        "poles": [
                            {"f_hz": m.f_hz, "zeta": m.zeta, "flag": f.value, "match": mt}
                            for m, f, mt in zip(e.modes, e.flags, e.matches)
                        ],
                    }
                    for e in self.entries
                ],
            }
        )


def _match(prev: ModalSet, cur: ModalSet, tol: Tolerances) -> tuple[list[Flag], list[int | None]]:
    n_prev = len(prev)
    # previous-mode candidates per current mode, closest first, ties by index
    by_dist = [sorted(range(n_prev), key=lambda i: (abs(cm.f_hz - prev[i].f_hz), i)) for cm in cur.modes]
    in_f, in_z, ok = [], [], []
    for cm, cand in zip(cur.modes, by_dist):
        f_ok = [i for i in cand if abs(cm.f_hz - prev[i].f_hz) / prev[i].f_hz <= tol.df_rel]
        z_ok = [i for i in f_ok if abs(cm.zeta - prev[i].zeta) / prev[i].zeta <= tol.dzeta_rel]
        in_f.append(f_ok)
        in_z.append(z_ok)
        ok.append([i for i in z_ok if mac(prev[i].phi, cm.phi) >= tol.mac_min])

    owner: dict[int, int] = {}  # previous index -> current index
    for c, cand in enumerate(ok):
        free = [i for i in cand if i not in owner]
        if free:
            owner[free[0]] = c

    def augment(c: int, seen: set[int]) -> bool:
        for i in ok[c]:
            if i in seen:
                continue
            seen.add(i)
            if i not in owner or augment(owner[i], seen):
                owner[i] = c
                return True
        return False

    # greedy can strand a mode whose only partner was taken by a neighbour;
    # augmenting paths make the match count maximal, so looser tolerances never lose a match
    partner = {c: i for i, c in owner.items()}
    for c in range(len(cur)):
        if c not in partner and ok[c] and augment(c, set()):
            partner = {cc: i for i, cc in owner.items()}

    flags: list[Flag] = []
    matches: list[int | None] = []
    for c in range(len(cur)):
        if c in partner:
            flags.append(Flag.STABLE)
            matches.append(partner[c])
            continue
        matches.append(None)
        taken = set(partner.values())
        if all(i in taken for i in range(n_prev)):
            flags.append(Flag.NEW)
        elif not [i for i in in_f[c] if i not in taken]:
            flags.append(Flag.UNSTABLE_FREQUENCY)
        elif not [i for i in in_z[c] if i not in taken]:
            flags.append(Flag.UNSTABLE_DAMPING)
        else:
            flags.append(Flag.UNSTABLE_SHAPE)
    return flags, matches


def classify(prev: ModalSet, cur: ModalSet, tolerances: Tolerances = Tolerances()) -> list[Flag]:
    """Stability flag for each mode of ``cur`` relative to the previous order ``prev``.

    Modes are visited in ascending frequency; each takes the closest unused
    previous mode that satisfies all three tolerances.  Augmenting paths
    then rematch any mode the greedy pass stranded, so the number of
    stable flags is the largest possible.  A mode with no partner is
    flagged by the first criterion that ruled out every unused candidate
    (frequency, then damping, then shape), or ``new`` if no previous mode
    is left.
    """
    return _match(prev, cur, tolerances)[0]


def _orders(orders) -> list[int]:
    if isinstance(orders, dict):
        orders = range(int(orders["start"]), int(orders["stop"]) + 1, int(orders.get("step", 2)))
    elif isinstance(orders, tuple) and len(orders) == 3 and not isinstance(orders, range):
        start, stop, step = orders
        orders = range(int(start), int(stop) + 1, int(step))
    out = sorted(int(k) for k in orders)
    if not out:
        raise ValueError("order range is empty")
    for k in out:
        if k < 2 or k % 2:
            raise ValueError(f"model orders must be even and >= 2, got {k}")
    if len(set(out)) != len(out):
        raise ValueError("model orders repeat")
    return out


def build_diagram(
    order_sets: Sequence[tuple[int, ModalSet, str | None]],
    tolerances: Tolerances = Tolerances(),
    seed: int | None = None,
    band=None,
) -> StabilizationDiagram:
    """Classify a precomputed sequence of (order, modes, note) results."""
    entries = []
    prev: ModalSet | None = None
    for order, modes, note in sorted(order_sets, key=lambda t: t[0]):
        if prev is None:
            flags, matches = [Flag.NEW] * len(modes), [None] * len(modes)
        else:
            flags, matches = _match(prev, modes, tolerances)
        entries.append(DiagramEntry(order, modes, tuple(flags), tuple(matches), note))
        prev = modes
    return StabilizationDiagram(tuple(entries), tolerances, seed, None if band is None else tuple(band))


def sweep(
    frf: FrfDataset,
    orders: Iterable[int] | dict | tuple = range(24, 51, 2),
    seed: int = 0,
    band: Sequence[float] | None = None,
    tolerances: Tolerances = Tolerances(),
    max_bins: int | None = DEFAULT_MAX_BINS,
    min_damping: float = MIN_DAMPING,
) -> StabilizationDiagram:
    """Identify at every order and flag each pole against the previous order.

    The pencil and its singular value decompositions are shared by all
    orders.  Orders the pencil cannot support are kept as empty entries
    with a note.
    """
    order_list = _orders(orders)
    if band is None:
        band = (float(frf.frequencies[0]), float(frf.frequencies[-1]))
    band = (float(band[0]), float(band[1]))
    channels = tuple(c.id for c in frf.output_meta)
    pencil = prepare_pencil(frf, seed, band, max_bins)
    results = []
    for k in order_list:
        try:
            modes = extract_modes(realize(pencil, k), band, seed=seed, channels=channels, min_damping=min_damping)
            note = None
        except (RankDeficientOrderError, DegenerateRealizationError, ValueError) as exc:
            modes = empty_modal_set(band, order=k, seed=seed, channels=channels)
            note = str(exc)
        results.append((k, modes, note))
    return build_diagram(results, tolerances, seed, band)


def _chains(diagram: StabilizationDiagram) -> list[list[tuple[int, int]]]:
    """Pole tracks as lists of (entry index, mode index), following stable links."""
    entries = diagram.entries
    successor: dict[tuple[int, int], tuple[int, int]] = {}
    has_pred: set[tuple[int, int]] = set()
    for e_idx in range(1, len(entries)):
        for m_idx, (flag, mt) in enumerate(zip(entries[e_idx].flags, entries[e_idx].matches)):
            if flag is Flag.STABLE and mt is not None:
                successor[(e_idx - 1, mt)] = (e_idx, m_idx)
                has_pred.add((e_idx, m_idx))
    chains = []
    for e_idx, e in enumerate(entries):
        for m_idx in range(len(e.modes)):
            node = (e_idx, m_idx)
            if node in has_pred:
                continue
            chain = [node]
            while chain[-1] in successor:
                chain.append(successor[chain[-1]])
            chains.append(chain)
    return chains


def consolidate(diagram: StabilizationDiagram, min_streak: int = 3) -> ModalSet:
    """Collapse persistent pole tracks into one mode each.

    A track is a run of poles linked by ``stable`` flags across consecutive
    orders.  Its streak counts the poles flagged ``stable``, so the pole
    that starts the track (``new`` or unstable) does not count; tracks with
    a streak of at least ``min_streak`` survive.  Tracks
    that never coexist at one order and agree in frequency and shape within
    the diagram tolerances are merged.  Each mode reports the median
    frequency and damping of its track and the shape from its highest order.
    """
    if min_streak < 2:
        raise ValueError("min_streak must be >= 2")
    entries = diagram.entries
    band = diagram.band or (entries[0].modes.band if entries else (0.0, 0.0))
    channels = entries[0].modes.channels if entries else None
    tol = diagram.tolerances

    # drop each track's head: it was not flagged stable
    tracks = [c[1:] for c in _chains(diagram) if len(c) - 1 >= min_streak]
    tracks.sort(key=lambda c: (np.median([entries[e].modes[m].f_hz for e, m in c]), c[0]))

    clusters: list[list[tuple[int, int]]] = []
    for track in tracks:
        f_t = float(np.median([entries[e].modes[m].f_hz for e, m in track]))
        top_t = entries[track[-1][0]].modes[track[-1][1]]
        orders_t = {e for e, _ in track}
        for cl in clusters:
            f_c = float(np.median([entries[e].modes[m].f_hz for e, m in cl]))
            top_c = entries[cl[-1][0]].modes[cl[-1][1]]
            if (
                orders_t.isdisjoint({e for e, _ in cl})
                and abs(f_t - f_c) / f_c <= tol.df_rel
                and mac(top_t.phi, top_c.phi) >= tol.mac_min
            ):
                cl.extend(track)
                cl.sort()
                break
        else:
            clusters.append(list(track))

    modes = []
    for cl in clusters:
        members = [entries[e].modes[m] for e, m in cl]
        top = entries[cl[-1][0]].modes[cl[-1][1]]
        modes.append(
            Mode(float(np.median([m.f_hz for m in members])), float(np.median([m.zeta for m in members])), top.phi)
        )
    # highest order that contributed a pole, so trailing all-unstable entries change nothing
    top_order = max((entries[cl[-1][0]].order for cl in clusters), default=None)
    return ModalSet(tuple(modes), band, order=top_order, seed=diagram.seed, channels=channels)
