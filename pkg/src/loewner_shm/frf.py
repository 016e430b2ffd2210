"""Multi-channel time series, FRF tensors and FRF estimation.

FRF tensors are stored outputs x inputs x bins, receptance or accelerance,
on a strictly ascending frequency grid that never includes DC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import (
    DimensionError,
    EmptyBandError,
    IllConditionedDivisionError,
    SingularPencilError,
)


class ChannelKind(str, Enum):
    FORCE_INPUT = "force-input"
    DISPLACEMENT_OUTPUT = "displacement-output"
    ACCELERATION_OUTPUT = "acceleration-output"


class Direction(str, Enum):
    Y = "y"
    Z = "z"
    OTHER = "other"


class ResponseKind(str, Enum):
    RECEPTANCE = "receptance"
    ACCELERANCE = "accelerance"


@dataclass(frozen=True)
class ChannelMeta:
    id: str
    kind: ChannelKind
    node_label: str = ""
    direction: Direction = Direction.OTHER
    sensitivity_note: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind.value,
            "node_label": self.node_label,
            "direction": self.direction.value,
        }
        if self.sensitivity_note is not None:
            d["sensitivity_note"] = self.sensitivity_note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelMeta":
        return cls(
            id=str(d["id"]),
            kind=ChannelKind(d["kind"]),
            node_label=str(d.get("node_label", "")),
            direction=Direction(d.get("direction", "other")),
            sensitivity_note=d.get("sensitivity_note"),
        )


def _check_unique(channels: Sequence[ChannelMeta]) -> None:
    ids = [c.id for c in channels]
    if len(set(ids)) != len(ids):
        raise DimensionError(f"channel ids are not unique: {ids}")


@dataclass(frozen=True, eq=False)
class TimeSeriesSet:
    """Real samples, channels x N, at a common sample rate."""

    sample_rate: float
    samples: np.ndarray
    channels: tuple[ChannelMeta, ...]

    def __post_init__(self):
        fs = float(self.sample_rate)
        if not (math.isfinite(fs) and fs > 0):
            raise DimensionError(f"sample rate must be finite and positive, got {self.sample_rate!r}")
        x = np.array(self.samples, dtype=float, ndmin=2)
        channels = tuple(self.channels)
        if x.shape[0] != len(channels):
            raise DimensionError(f"{x.shape[0]} sample rows for {len(channels)} channels")
        if x.shape[1] < 2:
            raise DimensionError("time series need at least 2 samples")
        _check_unique(channels)
        x.setflags(write=False)
        object.__setattr__(self, "sample_rate", fs)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "channels", channels)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    @property
    def channel_ids(self) -> list[str]:
        return [c.id for c in self.channels]

    def channel(self, channel_id: str) -> np.ndarray:
        return self.samples[self.channel_ids.index(channel_id)]

    def select(self, *kinds: ChannelKind) -> "TimeSeriesSet":
        keep = [i for i, c in enumerate(self.channels) if c.kind in kinds]
        if not keep:
            raise DimensionError(f"no channels of kind {[k.value for k in kinds]}")
        return TimeSeriesSet(self.sample_rate, self.samples[keep], tuple(self.channels[i] for i in keep))


def split_run(run: TimeSeriesSet) -> tuple[TimeSeriesSet, TimeSeriesSet]:
    """Split a recorded run into its force-input channels and its response channels."""
    stim = run.select(ChannelKind.FORCE_INPUT)
    resp = run.select(ChannelKind.DISPLACEMENT_OUTPUT, ChannelKind.ACCELERATION_OUTPUT)
    return stim, resp


@dataclass(frozen=True, eq=False)
class FrfDataset:
    """Sampled frequency response ``values[i, j, k] = H_ij(j 2 pi f_k)``."""

    frequencies: np.ndarray
    values: np.ndarray
    output_meta: tuple[ChannelMeta, ...]
    input_meta: tuple[ChannelMeta, ...]
    response_kind: ResponseKind = ResponseKind.RECEPTANCE

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float).ravel()
        h = np.array(self.values, dtype=complex)
        outs, ins = tuple(self.output_meta), tuple(self.input_meta)
        if h.ndim != 3:
            raise DimensionError(f"FRF values must be outputs x inputs x bins, got shape {h.shape}")
        if h.shape != (len(outs), len(ins), f.size):
            raise DimensionError(
                f"values shape {h.shape} inconsistent with {len(outs)} outputs, {len(ins)} inputs, {f.size} bins"
            )
        if not outs or not ins or f.size == 0:
            raise DimensionError("FRF needs at least one output, one input and one bin")
        if np.any(np.diff(f) <= 0):
            raise DimensionError("frequencies must be strictly increasing")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(h))):
            raise DimensionError("FRF contains non-finite entries")
        _check_unique(outs)
        _check_unique(ins)
        f.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", h)
        object.__setattr__(self, "output_meta", outs)
        object.__setattr__(self, "input_meta", ins)
        object.__setattr__(self, "response_kind", ResponseKind(self.response_kind))

    @property
    def n_outputs(self) -> int:
        return self.values.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.values.shape[1]

    @property
    def n_bins(self) -> int:
        return self.frequencies.size

    @property
    def s(self) -> np.ndarray:
        """Laplace points ``j 2 pi f`` of the bins."""
        return 2j * np.pi * self.frequencies

    def take_bins(self, idx) -> "FrfDataset":
        idx = np.asarray(idx, dtype=int)
        return replace(self, frequencies=self.frequencies[idx], values=self.values[:, :, idx])


def _spectra(x: np.ndarray, increments: bool) -> np.ndarray:
    if increments:
        # first differences with a quiescent pre-record sample
        x = np.diff(x, axis=-1, prepend=0.0)
    return np.fft.rfft(x, axis=-1)


def estimate_frf(
    stimuli: TimeSeriesSet | Sequence[TimeSeriesSet],
    responses: TimeSeriesSet | Sequence[TimeSeriesSet],
    *,
    increments: bool = False,
    floor: float = 1e-12,
    estimator: str = "plain",
    nperseg: int | None = None,
    response_kind: ResponseKind | str = ResponseKind.RECEPTANCE,
) -> FrfDataset:
    """Estimate an FRF tensor by spectral division, one run per input.

    Parameters
    ----------
    stimuli, responses
        Run ``j`` pairs ``stimuli[j]`` (a single force channel, the active
        input) with ``responses[j]`` (the same ``p`` output channels in every
        run). A single ``TimeSeriesSet`` is accepted for one-input data.
    increments
        Divide spectra of first-differenced records instead of the raw
        records. The ratio is unchanged for a linear system, but a held
        step becomes an impulse whose spectrum is flat, whereas the raw
        step has (numerically) zero spectrum at every non-DC bin.
    floor
        Relative guard: a retained input bin whose magnitude is at or below
        ``floor * max|U|`` raises :class:`IllConditionedDivisionError`.
        ``floor=0`` only rejects exact zeros.
    estimator
        ``"plain"`` for ``Y/U`` over the whole record; ``"h1"`` for a
        Hann-windowed, segment-averaged ``S_uy / S_uu`` over ``nperseg``
        samples.

    Returns
    -------
    FrfDataset
        Bins ``k fs / N`` for ``k = 1..N//2``; the DC bin is never returned.
    """
    if isinstance(stimuli, TimeSeriesSet):
        stimuli = [stimuli]
    if isinstance(responses, TimeSeriesSet):
        responses = [responses]
    stimuli, responses = list(stimuli), list(responses)
    if not stimuli or len(stimuli) != len(responses):
        raise DimensionError(f"{len(stimuli)} stimulus runs for {len(responses)} response runs")

    fs = stimuli[0].sample_rate
    n = stimuli[0].n_samples
    out_meta = responses[0].channels
    for st, rs in zip(stimuli, responses):
        if st.sample_rate != fs or rs.sample_rate != fs:
            raise DimensionError("all runs must share one sample rate")
        if st.n_samples != n or rs.n_samples != n:
            raise DimensionError("all runs must share one record length")
        if len(st.channels) != 1:
            raise DimensionError(f"each stimulus run carries exactly one active input, got {len(st.channels)}")
        if rs.channel_ids != [c.id for c in out_meta]:
            raise DimensionError("response channels differ between runs")

    columns = []
    if estimator == "plain":
        freqs = np.arange(1, n // 2 + 1) * fs / n
        for st, rs in zip(stimuli, responses):
            u = _spectra(st.samples[0], increments)
            y = _spectra(rs.samples, increments)
            mag = np.abs(u)
            thresh = floor * mag.max()
            bad = np.nonzero(mag[1:] <= thresh)[0]
            if bad.size:
                k = int(bad[0]) + 1
                raise IllConditionedDivisionError(k, k * fs / n, mag[k], thresh)
            columns.append(y[:, 1:] / u[1:])
    elif estimator == "h1":
        seg = nperseg or max(2, n // 8)
        for st, rs in zip(stimuli, responses):
            u = st.samples[0]
            y = rs.samples
            if increments:
                u = np.diff(u, prepend=0.0)
                y = np.diff(y, axis=-1, prepend=0.0)
            freqs, s_uu = signal.welch(u, fs=fs, window="hann", nperseg=seg, detrend=False)
            _, s_uy = signal.csd(u[None, :], y, fs=fs, window="hann", nperseg=seg, detrend=False)
            thresh = floor * s_uu.max()
            bad = np.nonzero(s_uu[1:] <= thresh)[0]
            if bad.size:
                k = int(bad[0]) + 1
                raise IllConditionedDivisionError(k, freqs[k], s_uu[k], thresh)
            columns.append(s_uy[:, 1:] / s_uu[1:])
        freqs = freqs[1:]
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    values = np.stack(columns, axis=1)
    in_meta = tuple(st.channels[0] for st in stimuli)
    return FrfDataset(freqs, values, out_meta, in_meta, ResponseKind(response_kind))


def select_band(frf: FrfDataset, f_lo: float, f_hi: float) -> FrfDataset:
    """Keep the bins with ``f_lo <= f <= f_hi``."""
    if not f_lo < f_hi:
        raise ValueError(f"band requires f_lo < f_hi, got [{f_lo}, {f_hi}]")
    idx = np.nonzero((frf.frequencies >= f_lo) & (frf.frequencies <= f_hi))[0]
    if idx.size == 0:
        raise EmptyBandError(
            f"no bins in [{f_lo}, {f_hi}] Hz (data spans {frf.frequencies[0]:.6g}-{frf.frequencies[-1]:.6g} Hz)"
        )
    if idx.size == frf.n_bins:
        return frf
    return frf.take_bins(idx)


def thin_bins(frf: FrfDataset, max_bins: int | None) -> FrfDataset:
    """Uniformly subsample to at most ``max_bins`` bins, always keeping both ends."""
    if max_bins is None or frf.n_bins <= max_bins:
        return frf
    if max_bins < 2:
        raise ValueError("max_bins must be at least 2")
    idx = np.unique(np.round(np.linspace(0, frf.n_bins - 1, int(max_bins))).astype(int))
    return frf.take_bins(idx)


def _default_meta(prefix: str, count: int, kind: ChannelKind) -> tuple[ChannelMeta, ...]:
    return tuple(ChannelMeta(f"{prefix}{i}", kind) for i in range(count))


def synthesize_frf(
    realization,
    frequencies,
    output_meta: Sequence[ChannelMeta] | None = None,
    input_meta: Sequence[ChannelMeta] | None = None,
    response_kind: ResponseKind | str = ResponseKind.RECEPTANCE,
) -> FrfDataset:
    """Evaluate ``C (s E - A)^{-1} B`` of a descriptor realization at ``s = j 2 pi f``."""
    E, A, B, C = realization.E, realization.A, realization.B, realization.C
    freqs = np.asarray(frequencies, dtype=float).ravel()
    p, m = C.shape[0], B.shape[1]
    values = np.empty((p, m, freqs.size), dtype=complex)
    inv_eps = 1.0 / np.finfo(float).eps
    for k, f in enumerate(freqs):
        pencil = 2j * np.pi * f * E - A
        if not np.all(np.isfinite(pencil)) or np.linalg.cond(pencil) >= inv_eps:
            raise SingularPencilError(f)
        values[:, :, k] = C @ np.linalg.solve(pencil, B)
    outs = tuple(output_meta) if output_meta is not None else _default_meta("y", p, ChannelKind.DISPLACEMENT_OUTPUT)
    ins = tuple(input_meta) if input_meta is not None else _default_meta("u", m, ChannelKind.FORCE_INPUT)
    return FrfDataset(freqs, values, outs, ins, ResponseKind(response_kind))
