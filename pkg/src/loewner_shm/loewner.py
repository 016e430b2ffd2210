"""Tangential Loewner-framework identification from MIMO FRF data.

Pipeline: FRF bins are split alternately into right (lambda) and left (mu)
interpolation points, compressed along seeded real tangential directions,
and closed under complex conjugation.  The Loewner and shifted Loewner
matrices built from that data are projected onto their dominant singular
subspaces to give a descriptor realization ``(E, A, B, C)``; modal
parameters follow from the generalized eigenproblem ``A x = lambda E x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    CoincidentPointsError,
    DegenerateRealizationError,
    DimensionError,
    InsufficientDataError,
    PencilConsistencyError,
    RankDeficientOrderError,
)
from .frf import FrfDataset, select_band, thin_bins
from .modes import ModalSet, Mode, normalize_shape

SYLVESTER_TOL = 1e-10
RANK_TOL = 1e-12
MAX_DAMPING = 0.5
# near-undamped poles are what interpolating noise produces; physical modes sit well above
MIN_DAMPING = 2e-3
DEFAULT_MAX_BINS = 800


@dataclass(frozen=True, eq=False)
class TangentialDirections:
    """Right directions as columns (m x rho) and left directions as rows (q x p)."""

    right: np.ndarray
    left: np.ndarray
    seed: int | None = None

    @property
    def m(self) -> int:
        return self.right.shape[0]

    @property
    def p(self) -> int:
        return self.left.shape[1]


def _unit_sign_fixed(x: np.ndarray, axis: int) -> np.ndarray:
    x = x / np.linalg.norm(x, axis=axis, keepdims=True)
    lead = x[0] if axis == 0 else x[:, :1]
    return x * np.where(lead < 0, -1.0, 1.0)


def generate_directions(seed: int, m: int, p: int, rho: int, q: int) -> TangentialDirections:
    """Draw reproducible real unit-norm tangential directions.

    Entries are uniform on [-1, 1] before normalization; each vector's
    first component is made non-negative, so ``m == 1`` gives all ones.
    """
    for name, v in (("m", m), ("p", p), ("rho", rho), ("q", q)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    rng = np.random.default_rng(seed)
    right = rng.uniform(-1.0, 1.0, size=(m, rho))
    left = rng.uniform(-1.0, 1.0, size=(q, p))
    return TangentialDirections(_unit_sign_fixed(right, 0), _unit_sign_fixed(left, 1), seed)


def split_counts(n_bins: int) -> tuple[int, int]:
    """Number of raw (right, left) points for ``n_bins`` alternating bins."""
    return n_bins // 2, (n_bins + 1) // 2


@dataclass(frozen=True, eq=False)
class InterpolationSets:
    """Right data ``(lam, R, W)`` and left data ``(mu, L, V)``.

    ``W`` is ``p x rho`` with ``W[:, i] = H(lam_i) R[:, i]`` and ``V`` is
    ``q x m`` with ``V[j] = L[j] H(mu_j)``.  After conjugate closure the
    points are interleaved as ``(z_1, conj z_1, z_2, conj z_2, ...)``.
    """

    lam: np.ndarray
    mu: np.ndarray
    W: np.ndarray
    V: np.ndarray
    directions: TangentialDirections

    @property
    def R(self) -> np.ndarray:
        return self.directions.right

    @property
    def L(self) -> np.ndarray:
        return self.directions.left

    @property
    def rho(self) -> int:
        return self.lam.size

    @property
    def q(self) -> int:
        return self.mu.size


def _interleave(a: np.ndarray, b: np.ndarray, axis: int) -> np.ndarray:
    stacked = np.stack([a, b], axis=axis + 1)
    shape = list(a.shape)
    shape[axis] *= 2
    return stacked.reshape(shape)


def partition(frf: FrfDataset, directions: TangentialDirections) -> InterpolationSets:
    """Split bins into right (odd index) and left (even index) tangential data."""
    if frf.n_bins < 2:
        raise InsufficientDataError(f"need at least 2 frequency bins, got {frf.n_bins}")
    n_right, n_left = split_counts(frf.n_bins)
    R, Lm = directions.right, directions.left
    if R.shape != (frf.n_inputs, n_right) or Lm.shape != (n_left, frf.n_outputs):
        raise DimensionError(
            f"directions sized R{R.shape}, L{Lm.shape}; need R({frf.n_inputs}, {n_right}), "
            f"L({n_left}, {frf.n_outputs})"
        )
    s = frf.s
    ri = np.arange(1, frf.n_bins, 2)
    li = np.arange(0, frf.n_bins, 2)
    H = frf.values
    W = np.einsum("pmk,mk->pk", H[:, :, ri], R)
    V = np.einsum("kp,pmk->km", Lm, H[:, :, li])

    lam = _interleave(s[ri], s[ri].conj(), 0)
    mu = _interleave(s[li], s[li].conj(), 0)
    closed = TangentialDirections(_interleave(R, R, 1), _interleave(Lm, Lm, 0), directions.seed)
    return InterpolationSets(lam, mu, _interleave(W, W.conj(), 1), _interleave(V, V.conj(), 0), closed)


def _pair_transform(n: int) -> np.ndarray:
    """Unitary block-diagonal map taking interleaved conjugate pairs to real/imaginary parts."""
    block = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)
    return np.kron(np.eye(n // 2), block)


@dataclass(frozen=True, eq=False)
class LoewnerPencil:
    L: np.ndarray
    Ls: np.ndarray
    sets: InterpolationSets

    @property
    def lam(self):
        return self.sets.lam

    @property
    def mu(self):
        return self.sets.mu

    @property
    def W(self):
        return self.sets.W

    @property
    def V(self):
        return self.sets.V

    @property
    def directions(self):
        return self.sets.directions

    def sylvester_residuals(self) -> tuple[float, float]:
        """Relative Frobenius residuals of the two Sylvester identities.

        Each residual is normalized by the norms of the two right-hand-side
        terms, the scale at which the entries were formed.
        """
        s = self.sets
        LW = s.L @ s.W
        VR = s.V @ s.R
        r1 = self.L * s.lam[None, :] - s.mu[:, None] * self.L - (LW - VR)
        LWl = LW * s.lam[None, :]
        MVR = s.mu[:, None] * VR
        r2 = self.Ls * s.lam[None, :] - s.mu[:, None] * self.Ls - (LWl - MVR)
        tiny = np.finfo(float).tiny
        n1 = np.linalg.norm(LW) + np.linalg.norm(VR)
        n2 = np.linalg.norm(LWl) + np.linalg.norm(MVR)
        return float(np.linalg.norm(r1) / max(n1, tiny)), float(np.linalg.norm(r2) / max(n2, tiny))

    @cached_property
    def real_form(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(L, Ls, V, W)`` after the conjugate-pair transform; all real."""
        s = self.sets
        if not _is_conjugate_closed(s):
            raise ValueError("pencil data are not conjugate-closed; a real realization needs paired points")
        Jr = _pair_transform(s.rho)
        Jl = _pair_transform(s.q).conj().T
        Lr = Jl @ self.L @ Jr
        Lsr = Jl @ self.Ls @ Jr
        Vr = Jl @ s.V
        Wr = s.W @ Jr
        return Lr.real.copy(), Lsr.real.copy(), Vr.real.copy(), Wr.real.copy()

    @cached_property
    def projectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Left singular vectors of ``[L, Ls]`` and right singular vectors of ``[L; Ls]``.

        Returns ``(Y, sigma_cols, X, sigma_rows)`` with ``Y`` ``q x r`` and
        ``X`` ``rho x r``, singular values descending.
        """
        Lr, Lsr, _, _ = self.real_form
        Y, sig_c, _ = np.linalg.svd(np.hstack([Lr, Lsr]), full_matrices=False)
        _, sig_r, Xh = np.linalg.svd(np.vstack([Lr, Lsr]), full_matrices=False)
        return Y, sig_c, Xh.T, sig_r


def _is_conjugate_closed(s: InterpolationSets) -> bool:
    if s.rho % 2 or s.q % 2:
        return False
    pairs = (
        (s.lam[1::2], s.lam[0::2]),
        (s.mu[1::2], s.mu[0::2]),
        (s.W[:, 1::2], s.W[:, 0::2]),
        (s.V[1::2], s.V[0::2]),
        (s.R[:, 1::2], s.R[:, 0::2]),
        (s.L[1::2], s.L[0::2]),
    )
    return all(np.array_equal(b, np.conj(a)) for b, a in pairs)


def build_pencil(sets: InterpolationSets) -> LoewnerPencil:
    """Form the Loewner and shifted Loewner matrices entrywise.

    ``L[j, i] = (v_j r_i - l_j w_i) / (mu_j - lam_i)`` and
    ``Ls[j, i] = (mu_j v_j r_i - lam_i l_j w_i) / (mu_j - lam_i)``.
    """
    lam, mu = sets.lam, sets.mu
    diff = mu[:, None] - lam[None, :]
    scale = np.maximum(np.maximum(np.abs(mu)[:, None], np.abs(lam)[None, :]), 1.0)
    clash = np.argwhere(np.abs(diff) <= 1e-14 * scale)
    if clash.size:
        j, i = clash[0]
        raise CoincidentPointsError(mu[j], lam[i])
    VR = sets.V @ sets.R
    LW = sets.L @ sets.W
    Lmat = (VR - LW) / diff
    Ls = (mu[:, None] * VR - LW * lam[None, :]) / diff
    pencil = LoewnerPencil(Lmat, Ls, sets)
    r1, r2 = pencil.sylvester_residuals()
    if max(r1, r2) > SYLVESTER_TOL:
        raise PencilConsistencyError(f"Sylvester residuals {r1:.3e}, {r2:.3e} exceed {SYLVESTER_TOL:g}")
    return pencil


@dataclass(frozen=True, eq=False)
class StateSpaceRealization:
    """Real descriptor system ``E x' = A x + B u, y = C x`` (no feedthrough)."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    order: int
    singular_values: np.ndarray

    def __post_init__(self):
        for name in ("E", "A", "B", "C", "singular_values"):
            a = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"realization matrix {name} has non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        k = int(self.order)
        if k < 1 or self.E.shape != (k, k) or self.A.shape != (k, k):
            raise DimensionError("E and A must be order x order")
        if self.B.shape[0] != k or self.C.shape[1] != k:
            raise DimensionError("B rows and C columns must equal the order")

    def poles(self) -> np.ndarray:
        return sla.eigvals(self.A, self.E)

    def transfer(self, s: complex) -> np.ndarray:
        return self.C @ np.linalg.solve(s * self.E - self.A, self.B)


def realize(pencil: LoewnerPencil, k: int) -> StateSpaceRealization:
    """Project the pencil onto its leading ``k`` singular directions.

    ``E = -Y* L X``, ``A = -Y* Ls X``, ``B = Y* V``, ``C = W X`` with the
    projectors taken from the real (conjugate-pair transformed) form.
    """
    k = int(k)
    if k < 1 or k % 2:
        raise ValueError(f"order must be a positive even integer, got {k}")
    kmax = min(pencil.sets.q, pencil.sets.rho)
    if k > kmax:
        raise ValueError(f"order {k} exceeds min(q, rho) = {kmax}")
    Y, sig_c, X, sig_r = pencil.projectors
    ratio = min(sig_c[k - 1] / sig_c[0], sig_r[k - 1] / sig_r[0]) if sig_c[0] > 0 and sig_r[0] > 0 else 0.0
    if not ratio >= RANK_TOL:
        raise RankDeficientOrderError(k, ratio)
    Lr, Lsr, Vr, Wr = pencil.real_form
    Yk, Xk = Y[:, :k], X[:, :k]
    E = -Yk.T @ Lr @ Xk
    A = -Yk.T @ Lsr @ Xk
    B = Yk.T @ Vr
    C = Wr @ Xk
    return StateSpaceRealization(E, A, B, C, k, sig_r.copy())


def tangential_residuals(realization: StateSpaceRealization, sets: InterpolationSets) -> tuple[float, float]:
    """Worst relative mismatch of the right and left interpolation conditions."""
    right = 0.0
    for i, lam in enumerate(sets.lam):
        w = realization.transfer(lam) @ sets.R[:, i]
        right = max(right, np.linalg.norm(w - sets.W[:, i]) / max(np.linalg.norm(sets.W[:, i]), 1e-300))
    left = 0.0
    for j, mu in enumerate(sets.mu):
        v = sets.L[j] @ realization.transfer(mu)
        left = max(left, np.linalg.norm(v - sets.V[j]) / max(np.linalg.norm(sets.V[j]), 1e-300))
    return float(right), float(left)


def extract_modes(
    realization: StateSpaceRealization,
    band: Sequence[float],
    *,
    seed: int | None = None,
    channels: Sequence[str] | None = None,
    min_damping: float = MIN_DAMPING,
) -> ModalSet:
    """Modes of ``(A, E)`` that are stable, underdamped and inside ``band``.

    One pole per conjugate pair is kept (positive imaginary part), with
    ``min_damping <= zeta < 0.5``.  Shapes are ``C x`` normalized to unit norm with their
    largest entry real positive.

    Surplus states beyond the data's rank make ``E`` nearly singular; they
    show up as infinite eigenvalues and are dropped.  Only a singular
    pencil, where ``det(A - sE)`` vanishes identically, is an error.
    """
    E, A, C = realization.E, realization.A, realization.C
    e_norm = np.linalg.norm(E, 2)
    if e_norm == 0.0:
        raise DegenerateRealizationError("descriptor matrix E is zero")
    ab, vecs = sla.eig(A, E, homogeneous_eigvals=True)
    alpha, beta = ab
    # a pair with both alpha and beta at rounding level means det(A - sE) vanishes for every s
    tol = realization.order * np.finfo(float).eps
    if np.any((np.abs(alpha) <= tol * np.linalg.norm(A, 2)) & (np.abs(beta) <= tol * e_norm)):
        raise DegenerateRealizationError("pencil (A, E) is singular at working precision")
    f_lo, f_hi = float(band[0]), float(band[1])
    modes = []
    for i in range(alpha.size):
        # infinite eigenvalue from a null direction of E
        if abs(beta[i]) <= tol * e_norm:
            continue
        pole = alpha[i] / beta[i]
        if not np.isfinite(pole) or pole.imag <= 0 or pole.real >= 0:
            continue
        mag = abs(pole)
        f = mag / (2 * np.pi)
        zeta = -pole.real / mag
        if not (f_lo <= f <= f_hi) or not min_damping <= zeta < MAX_DAMPING:
            continue
        modes.append(Mode(f, zeta, normalize_shape(C @ vecs[:, i])))
    return ModalSet(tuple(modes), (f_lo, f_hi), order=realization.order, seed=seed,
                    channels=None if channels is None else tuple(channels))


def prepare_pencil(
    frf: FrfDataset,
    seed: int,
    band: Sequence[float] | None = None,
    max_bins: int | None = DEFAULT_MAX_BINS,
) -> LoewnerPencil:
    """Band-limit and thin ``frf``, draw directions from ``seed`` and build the pencil."""
    if band is not None:
        frf = select_band(frf, band[0], band[1])
    frf = thin_bins(frf, max_bins)
    n_right, n_left = split_counts(frf.n_bins)
    if n_right < 1:
        raise InsufficientDataError(f"need at least 2 frequency bins, got {frf.n_bins}")
    directions = generate_directions(seed, frf.n_inputs, frf.n_outputs, n_right, n_left)
    return build_pencil(partition(frf, directions))


def identify(
    frf: FrfDataset,
    k: int,
    seed: int = 0,
    band: Sequence[float] | None = None,
    max_bins: int | None = DEFAULT_MAX_BINS,
    min_damping: float = MIN_DAMPING,
) -> ModalSet:
    """Order-``k`` modal identification of ``frf`` over ``band``."""
    if band is None:
        band = (float(frf.frequencies[0]), float(frf.frequencies[-1]))
    pencil = prepare_pencil(frf, seed, band, max_bins)
    return extract_modes(
        realize(pencil, k), band, seed=seed, channels=[c.id for c in frf.output_meta], min_damping=min_damping
    )
