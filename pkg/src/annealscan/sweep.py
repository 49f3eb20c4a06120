"""Spectral sweeps over the annealing parameter and branch tracking.

A sweep solves for the ``nev`` lowest eigenpairs of H(s) on a uniform grid,
warm-starting each solve from the previous step's eigenvectors.  Stored
eigenvectors are gauge-fixed: the first snapshot makes the largest-magnitude
component of each vector real positive; later snapshots align phases against
the previous step, and Ritz vectors inside an energy cluster tighter than
the solver's resolution are rotated onto the previous step's vectors by an
orthogonal Procrustes fit.  Rotating inside a degenerate eigenspace is a
pure gauge choice (energies are untouched) but it keeps branch labels and
overlaps stable through exact multiplets, where the raw solver basis is
arbitrary.

Branch tracking matches consecutive snapshots by the k x k matrix of overlap
magnitudes, solving the assignment problem exactly (bitmask dynamic program)
rather than greedily; a branch whose matched overlap falls below the lost
threshold is flagged from that step on.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .eigensolve import DEFAULT_SOLVER_SEED, lowest_eigenpairs
from .hamiltonian import (AnnealOperator, HamiltonianSpec, Schedule,
                          LINEAR_SCHEDULE, serialize_hamiltonian, sign_table)

# Energy clusters tighter than this (relative to max(1, |E|)) are treated as
# numerically degenerate when gauge-aligning across steps.
DEGENERACY_GAUGE_RTOL = 1e-11


@dataclass
class SweepConfig:
    """Grid, window and bookkeeping knobs for one sweep."""

    s_start: float = 0.0
    s_end: float = 1.0
    s_steps: int = 200
    nev: int = 8
    tolerance: float = 1e-9
    save_eigenvectors: bool = False
    track_by_overlap: bool = False
    track_observables: bool = False
    track_zz: bool = False
    warm_start: bool = True
    solver_seed: int = DEFAULT_SOLVER_SEED

    def __post_init__(self):
        if not (0.0 <= self.s_start < self.s_end <= 1.0):
            raise ValueError("need 0 <= s_start < s_end <= 1")
        if self.s_steps < 2:
            raise ValueError("s_steps must be at least 2")
        if self.nev < 1:
            raise ValueError("nev must be at least 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    def grid(self) -> np.ndarray:
        return np.linspace(self.s_start, self.s_end, self.s_steps)


@dataclass
class SpectralSnapshot:
    """Eigen-data at one grid point."""

    s: float
    energies: np.ndarray
    residual_norms: np.ndarray
    eigenvectors: np.ndarray | None = None  # (dim, nev), gauge-fixed
    z_expect: np.ndarray | None = None      # (nev, n)
    zz_corr: np.ndarray | None = None       # (nev, n, n)
    degenerate: bool = False                # solver-resolution cluster present


@dataclass
class SpectralSweep:
    """All snapshots of one sweep plus provenance for persistence."""

    config: SweepConfig
    n_qubits: int
    snapshots: list[SpectralSnapshot]
    provenance: dict = field(default_factory=dict)

    @property
    def s_grid(self) -> np.ndarray:
        return np.array([snap.s for snap in self.snapshots])

    def energy_matrix(self) -> np.ndarray:
        """(steps, nev) array of sorted energies."""
        return np.vstack([snap.energies for snap in self.snapshots])

    def has_eigenvectors(self) -> bool:
        return all(snap.eigenvectors is not None for snap in self.snapshots)


@dataclass
class TrackedBranches:
    """Diabatic branch bookkeeping over a sweep.

    ``permutations[t, i]`` is the branch id occupying sorted position ``i``
    at step ``t`` (branch id = sorted position at the first step), so each
    row is a bijection on 0..k-1.  ``overlaps[t, i]`` is the overlap
    magnitude that matched this position to the previous step (1.0 at t=0).
    ``lost_at[b]`` is the first step where branch b's overlap fell below the
    lost threshold, or -1.
    """

    permutations: np.ndarray
    overlaps: np.ndarray
    lost_at: np.ndarray
    lost_threshold: float = 0.5

    def branch_energies(self, sweep: SpectralSweep) -> np.ndarray:
        """(steps, k) energies reordered so column b follows branch b."""
        sorted_e = sweep.energy_matrix()
        out = np.empty_like(sorted_e)
        for t in range(sorted_e.shape[0]):
            out[t, self.permutations[t]] = sorted_e[t]
        return out


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def observables_z(vector: np.ndarray, n_qubits: int) -> np.ndarray:
    """Per-qubit <Z_i> of one normalized state."""
    probs = _probabilities(vector, n_qubits)
    return sign_table(n_qubits) @ probs


def correlations_zz(vector: np.ndarray, n_qubits: int) -> np.ndarray:
    """Symmetric <Z_i Z_j> matrix of one normalized state; diagonal is 1."""
    probs = _probabilities(vector, n_qubits)
    signs = sign_table(n_qubits)
    corr = (signs * probs) @ signs.T
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)  # Z_i^2 = I identically
    return corr


def _probabilities(vector: np.ndarray, n_qubits: int) -> np.ndarray:
    if vector.shape != (1 << n_qubits,):
        raise ValueError(
            f"vector length {vector.shape} does not match {n_qubits} qubits"
        )
    probs = np.abs(vector) ** 2
    norm = probs.sum()
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"state not normalized: |v|^2 = {norm!r}")
    return probs / norm


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------

def sweep(hi: HamiltonianSpec, hp: HamiltonianSpec,
          schedule: Schedule = LINEAR_SCHEDULE,
          config: SweepConfig | None = None) -> SpectralSweep:
    """Solve the lowest ``nev`` eigenpairs across the s grid.

    Eigenvectors are kept in the snapshots when ``save_eigenvectors`` is set
    or any tracking flag needs them.  Warm starts reuse the previous step's
    vectors as the initial subspace; disabling them must not change energies
    beyond tolerance (it only costs restart cycles).
    """
    config = config or SweepConfig()
    operator = AnnealOperator(hi, hp, schedule)
    dim = operator.dimension
    if config.nev > dim:
        raise ValueError(f"nev = {config.nev} exceeds 2^N = {dim}")

    keep_vectors = (config.save_eigenvectors or config.track_by_overlap
                    or config.track_observables or config.track_zz)
    snapshots: list[SpectralSnapshot] = []
    previous: np.ndarray | None = None

    for s in config.grid():
        # On the cold first solve, orient any degenerate cluster by dH/ds
        # restricted to it: branch identity through a level that splits as
        # s moves is otherwise left to an arbitrary basis choice.
        derivative_gauge = _block_apply_ds(operator, float(s))
        values, vectors, residuals = lowest_eigenpairs(
            operator.matvec_at(s), dim, config.nev,
            tol=config.tolerance,
            initial_subspace=previous if config.warm_start else None,
            seed=config.solver_seed,
            dtype=operator.dtype,
            split_gauge=derivative_gauge,
        )
        vectors, clustered = _gauge_fix(values, vectors, previous)
        snap = SpectralSnapshot(
            s=float(s), energies=values, residual_norms=residuals,
            degenerate=clustered,
        )
        if keep_vectors:
            snap.eigenvectors = vectors
        if config.track_observables or config.track_zz:
            n = operator.n_qubits
            if config.track_observables:
                snap.z_expect = np.vstack(
                    [observables_z(vectors[:, i], n) for i in range(config.nev)]
                )
            if config.track_zz:
                snap.zz_corr = np.stack(
                    [correlations_zz(vectors[:, i], n) for i in range(config.nev)]
                )
        snapshots.append(snap)
        previous = vectors

    return SpectralSweep(
        config=config, n_qubits=operator.n_qubits, snapshots=snapshots,
        provenance=_provenance(hi, hp, schedule, config),
    )


def _block_apply_ds(operator: AnnealOperator, s: float):
    """Column-wise dH/ds application for the solver's cluster orientation."""
    def apply_block(block: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [operator.apply_ds(s, block[:, j]) for j in range(block.shape[1])]
        )
    return apply_block


def _gauge_fix(values: np.ndarray, vectors: np.ndarray,
               previous: np.ndarray | None) -> tuple[np.ndarray, bool]:
    """Deterministic eigenvector gauge; see the module docstring."""
    k = vectors.shape[1]
    vectors = vectors.copy()
    tol = DEGENERACY_GAUGE_RTOL * max(1.0, float(np.abs(values).max()))
    clusters = _clusters(values, tol)
    has_cluster = any(len(c) > 1 for c in clusters)

    if previous is None:
        for i in range(k):
            lead = np.argmax(np.abs(vectors[:, i]))
            phase = vectors[lead, i]
            if phase != 0:
                vectors[:, i] *= np.conj(phase) / abs(phase)
        return vectors, has_cluster

    for cluster in clusters:
        cols = list(cluster)
        if len(cols) == 1:
            i = cols[0]
            ov = np.vdot(previous[:, i], vectors[:, i]) if i < previous.shape[1] else 0.0
            if abs(ov) > 1e-12:
                vectors[:, i] *= np.conj(ov) / abs(ov)
            continue
        prev_cols = [i for i in cols if i < previous.shape[1]]
        if len(prev_cols) != len(cols):
            continue
        # orthogonal Procrustes: rotate the cluster basis onto the previous
        # step's vectors occupying the same sorted positions
        cross = vectors[:, cols].conj().T @ previous[:, cols]
        u, _, vh = np.linalg.svd(cross)
        vectors[:, cols] = vectors[:, cols] @ (u @ vh)
    return vectors, has_cluster


def _clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    clusters, current = [], [0]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] <= tol:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)
    return clusters


def _provenance(hi, hp, schedule, config) -> dict:
    hi_text = serialize_hamiltonian(hi)
    hp_text = serialize_hamiltonian(hp)
    return {
        "hi_text": hi_text,
        "hp_text": hp_text,
        "hi_sha256": hashlib.sha256(hi_text.encode()).hexdigest(),
        "hp_sha256": hashlib.sha256(hp_text.encode()).hexdigest(),
        "hi_offset": hi.constant_offset,
        "hp_offset": hp.constant_offset,
        "schedule_kind": schedule.kind,
        "schedule_table": schedule.table,
        "solver_seed": config.solver_seed,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


# ---------------------------------------------------------------------------
# branch tracking
# ---------------------------------------------------------------------------

def track_branches(sweep_result: SpectralSweep,
                   lost_threshold: float = 0.5) -> TrackedBranches:
    """Follow eigenvector branches through the sweep by overlap.

    Consecutive snapshots are matched with the exact assignment maximizing
    total overlap magnitude (ties broken toward the ascending-index
    matching).  As a side effect, the stored eigenvectors are re-phased so
    that every matched consecutive overlap is real and non-negative.

    Requires eigenvectors in every snapshot.
    """
    if not sweep_result.has_eigenvectors():
        raise ValueError("tracking requires stored eigenvectors in every snapshot")
    snaps = sweep_result.snapshots
    steps, k = len(snaps), sweep_result.config.nev
    permutations = np.zeros((steps, k), dtype=np.int64)
    overlaps = np.ones((steps, k))
    lost_at = np.full(k, -1, dtype=np.int64)
    permutations[0] = np.arange(k)

    prev = snaps[0].eigenvectors
    for t in range(1, steps):
        cur = snaps[t].eigenvectors
        cross = prev.conj().T @ cur          # cross[j_prev, i_cur]
        weight = np.abs(cross)
        match = _best_assignment(weight)     # match[i_cur] = j_prev
        for i in range(k):
            j = match[i]
            permutations[t, i] = permutations[t - 1, j]
            overlaps[t, i] = weight[j, i]
            phase = cross[j, i]
            if abs(phase) > 1e-12:
                cur[:, i] *= np.conj(phase) / abs(phase)
            branch = permutations[t, i]
            if overlaps[t, i] < lost_threshold and lost_at[branch] == -1:
                lost_at[branch] = t
        prev = cur
    return TrackedBranches(permutations, overlaps, lost_at, lost_threshold)


def _best_assignment(weight: np.ndarray) -> np.ndarray:
    """Exact max-total-weight assignment via DP over column subsets.

    ``weight[j, i]`` scores matching current column i to previous row j.
    Returns match[i] = j.  O(k * 2^k); the tracking window is small (k <= 8
    by default), so this stays negligible.  Deterministic: on exact ties the
    first (lowest-row) maximizer encountered wins.
    """
    k = weight.shape[0]
    if k > 20:
        raise ValueError("assignment window too large (k > 20)")
    full = 1 << k
    score = np.full(full, -np.inf)
    score[0] = 0.0
    choice = np.full(full, -1, dtype=np.int64)
    by_count = [[] for _ in range(k + 1)]  # states grouped by matched-column count
    for mask in range(full):
        by_count[bin(mask).count("1")].append(mask)
    for i in range(k):  # match column i against every unused row
        for mask in by_count[i]:
            base = score[mask]
            if base == -np.inf:
                continue
            for j in range(k):
                bit = 1 << j
                if mask & bit:
                    continue
                cand = base + weight[j, i]
                nxt = mask | bit
                if cand > score[nxt]:
                    score[nxt] = cand
                    choice[nxt] = j
    match = np.zeros(k, dtype=np.int64)
    mask = full - 1
    for i in range(k - 1, -1, -1):
        j = choice[mask]
        match[i] = j
        mask ^= 1 << j
    return match
