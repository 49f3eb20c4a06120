"""Diagnostics computed from finished sweeps.

Everything here is pure post-processing over immutable sweep data: gap
series, minimum-gap summaries with sub-grid refinement, matrix elements of
H(s) and dH/ds in the instantaneous eigenbasis, the adiabatic condition
ratio R(s) = |M_10| / Delta_10^2, and ensemble aggregation.

Conventions:
  - All series are indexed by the sweep grid; levels are the sorted levels
    unless a tracking result is supplied, in which case matrix elements are
    taken between branches instead.
  - Gaps at or below ``DEGENERATE_GAP`` mark exact degeneracies.  Matrix
    elements inside a degenerate block depend on the eigenbasis choice, so
    consumers (and the test suite) must not read meaning into them.
  - R(s) is reported at every grid point; points with Delta_10 below
    ``NEAR_SINGULAR_GAP`` carry a flag instead of being clipped or dropped.
    Dropping is a presentation decision and happens in the plotting layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import (AnnealOperator, HamiltonianSpec, Schedule,
                          LINEAR_SCHEDULE)
from .sweep import SpectralSweep, TrackedBranches

# Levels closer than this are exact degeneracies for reporting purposes.
DEGENERATE_GAP = 1e-10
# Below this Delta_10 the ratio R is flagged near-singular.
NEAR_SINGULAR_GAP = 1e-8


# ---------------------------------------------------------------------------
# gap series and minimum gap
# ---------------------------------------------------------------------------

@dataclass
class GapSeries:
    """Level spacings on the sweep grid.

    ``from_ground[t, k-1]`` is E_k - E_0 at step t (columns k = 1..nev-1)
    and ``consecutive[t, k-1]`` is E_k - E_{k-1}.  Energies are the sorted
    levels, so every entry is non-negative up to solver tolerance.
    """

    s_grid: np.ndarray
    from_ground: np.ndarray
    consecutive: np.ndarray

    @property
    def delta_10(self) -> np.ndarray:
        return self.from_ground[:, 0]

    @property
    def n_levels(self) -> int:
        return self.from_ground.shape[1] + 1


@dataclass
class MinGapSummary:
    """Minimum of Delta_10 over the grid, with sub-grid refinement.

    ``dmin_raw``/``s_star_raw`` are the discrete grid minimum.  The refined
    values come from the parabola through the three points around it; on a
    boundary minimum, or when the three points have no positive curvature,
    refinement is skipped and both pairs coincide.  ``degenerate`` marks a
    minimum at or below the exact-degeneracy threshold.  The labels tie a
    summary to its instance inside ensembles.
    """

    dmin_raw: float
    s_star_raw: float
    dmin: float
    s_star: float
    degenerate: bool = False
    instance: str = ""
    n_qubits: int = 0
    seed: int = -1


def gaps(sweep: SpectralSweep) -> GapSeries:
    """Element-wise gap series of a sweep with at least two levels."""
    energies = sweep.energy_matrix()
    if energies.shape[1] < 2:
        raise ValueError("gap series needs nev >= 2")
    return GapSeries(
        s_grid=sweep.s_grid,
        from_ground=energies[:, 1:] - energies[:, :1],
        consecutive=np.diff(energies, axis=1),
    )


def min_gap(series: GapSeries, instance: str = "", n_qubits: int = 0,
            seed: int = -1) -> MinGapSummary:
    """Locate the Delta_10 minimum and refine it below grid resolution.

    The refined value can only move down from the raw grid value (a vertex
    of a positive-curvature parabola through the bracketing points), and the
    refined location stays inside the bracketing interval.  Both are clamped
    so a V-shaped exact crossing cannot extrapolate below zero.
    """
    delta = series.delta_10
    s = series.s_grid
    if delta.size == 0:
        raise ValueError("empty gap series")
    i = int(np.argmin(delta))
    dmin_raw = float(delta[i])
    s_raw = float(s[i])
    dmin, s_star = dmin_raw, s_raw

    if 0 < i < delta.size - 1:
        left = (s[i - 1] - s_raw, float(delta[i - 1]))
        right = (s[i + 1] - s_raw, float(delta[i + 1]))
        # quadratic q(x) = a x^2 + b x + dmin_raw through both neighbours
        # (x relative to the grid minimum)
        denom = left[0] * right[0] * (right[0] - left[0])
        a = (left[0] * (right[1] - dmin_raw)
             - right[0] * (left[1] - dmin_raw)) / denom
        b = (left[0] ** 2 * (right[1] - dmin_raw)
             - right[0] ** 2 * (left[1] - dmin_raw)) / -denom
        if a > 0.0:
            x = -b / (2.0 * a)
            lo, hi = left[0], right[0]
            x = min(max(x, lo), hi)
            value = a * x * x + b * x + dmin_raw
            dmin = max(min(value, dmin_raw), 0.0)
            s_star = s_raw + x

    return MinGapSummary(
        dmin_raw=dmin_raw, s_star_raw=s_raw, dmin=dmin, s_star=s_star,
        degenerate=dmin <= DEGENERATE_GAP,
        instance=instance, n_qubits=n_qubits, seed=seed,
    )


# ---------------------------------------------------------------------------
# matrix elements
# ---------------------------------------------------------------------------

@dataclass
class MatrixElementSeries:
    """H(s) and dH/ds in the computed eigenbasis, per grid point.

    ``h_elements[t, m, n]`` is <m|H(s_t)|n> and ``m_elements[t, m, n]`` is
    <m|dH/ds|n>, both over the stored eigenvectors (sorted order, or branch
    order when built from a tracking result).  Within solver tolerance the
    H matrix is diagonal with the sorted energies on the diagonal, and M is
    Hermitian; neither property is enforced here, so tests can measure them.
    """

    s_grid: np.ndarray
    h_elements: np.ndarray
    m_elements: np.ndarray
    branch_order: bool = False

    @property
    def abs_m10(self) -> np.ndarray:
        return np.abs(self.m_elements[:, 1, 0])


def matrix_elements(sweep: SpectralSweep, hi: HamiltonianSpec,
                    hp: HamiltonianSpec,
                    schedule: Schedule = LINEAR_SCHEDULE,
                    tracked: TrackedBranches | None = None) -> MatrixElementSeries:
    """Compute <m|H|n> and <m|dH/ds|n> over a sweep's stored eigenvectors.

    dH/ds is applied matrix-free as A'(s) H_I + B'(s) H_P.  Passing a
    tracking result permutes the columns at each step so indices name
    branches rather than sorted positions.
    """
    if not sweep.has_eigenvectors():
        raise ValueError("matrix elements require stored eigenvectors; "
                         "rerun the sweep with eigenvectors enabled")
    operator = AnnealOperator(hi, hp, schedule)
    if operator.n_qubits != sweep.n_qubits:
        raise ValueError(
            f"operator acts on {operator.n_qubits} qubits, "
            f"sweep holds {sweep.n_qubits}"
        )
    steps = len(sweep.snapshots)
    k = sweep.config.nev
    dtype = np.result_type(operator.dtype,
                           sweep.snapshots[0].eigenvectors.dtype)
    h_out = np.zeros((steps, k, k), dtype=dtype)
    m_out = np.zeros((steps, k, k), dtype=dtype)

    for t, snap in enumerate(sweep.snapshots):
        vectors = snap.eigenvectors
        if tracked is not None:
            by_branch = np.empty_like(vectors)
            by_branch[:, tracked.permutations[t]] = vectors
            vectors = by_branch
        h_cols = np.column_stack(
            [operator.apply(snap.s, vectors[:, j]) for j in range(k)]
        )
        m_cols = np.column_stack(
            [operator.apply_ds(snap.s, vectors[:, j]) for j in range(k)]
        )
        h_out[t] = vectors.conj().T @ h_cols
        m_out[t] = vectors.conj().T @ m_cols

    return MatrixElementSeries(
        s_grid=sweep.s_grid, h_elements=h_out, m_elements=m_out,
        branch_order=tracked is not None,
    )


# ---------------------------------------------------------------------------
# adiabatic condition ratio
# ---------------------------------------------------------------------------

@dataclass
class AdiabaticSeries:
    """R(s) = |M_10| / Delta_10^2 with near-singular flags.

    ``flagged`` marks points where Delta_10 < NEAR_SINGULAR_GAP; the ratio
    at such points is numerically meaningless but still recorded, so the
    identity R * Delta^2 = |M_10| holds wherever it is finite.
    """

    s_grid: np.ndarray
    ratio: np.ndarray
    flagged: np.ndarray
    abs_m10: np.ndarray
    delta_10: np.ndarray


def adiabatic_ratio(elements: MatrixElementSeries,
                    series: GapSeries) -> AdiabaticSeries:
    """Pointwise R(s) from aligned matrix-element and gap series."""
    if elements.s_grid.shape != series.s_grid.shape or not np.allclose(
            elements.s_grid, series.s_grid, rtol=0.0, atol=1e-12):
        raise ValueError("matrix-element and gap series use different grids")
    delta = series.delta_10
    m10 = elements.abs_m10
    flagged = delta < NEAR_SINGULAR_GAP
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = m10 / np.square(delta)
    return AdiabaticSeries(
        s_grid=series.s_grid.copy(), ratio=ratio, flagged=flagged,
        abs_m10=m10, delta_10=delta.copy(),
    )


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class SizeStatistics:
    """Aggregate minimum-gap statistics of one problem size."""

    n_qubits: int
    count: int
    dmin_min: float
    dmin_median: float
    dmin_mean: float
    dmin_max: float
    sstar_median: float
    hardest: MinGapSummary
    typical: MinGapSummary
    easiest: MinGapSummary


@dataclass
class EnsembleSummary:
    """Per-size statistics plus the picked representative instances.

    hardest = smallest refined minimum gap, easiest = largest, typical =
    closest to the size's mean.  Ties resolve to the first run in input
    order, which is deterministic because ensembles enumerate seeds in
    order.
    """

    runs: list[MinGapSummary]
    by_size: dict[int, SizeStatistics] = field(default_factory=dict)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(sorted(self.by_size))


def ensemble_summary(runs: list[MinGapSummary]) -> EnsembleSummary:
    """Aggregate per-instance summaries by problem size."""
    if not runs:
        raise ValueError("ensemble summary needs at least one run")
    by_size: dict[int, SizeStatistics] = {}
    for n in sorted({run.n_qubits for run in runs}):
        group = [run for run in runs if run.n_qubits == n]
        dmins = np.array([run.dmin for run in group])
        mean = float(dmins.mean())
        by_size[n] = SizeStatistics(
            n_qubits=n,
            count=len(group),
            dmin_min=float(dmins.min()),
            dmin_median=float(np.median(dmins)),
            dmin_mean=mean,
            dmin_max=float(dmins.max()),
            sstar_median=float(np.median([run.s_star for run in group])),
            hardest=group[int(np.argmin(dmins))],
            easiest=group[int(np.argmax(dmins))],
            typical=group[int(np.argmin(np.abs(dmins - mean)))],
        )
    return EnsembleSummary(runs=list(runs), by_size=by_size)
