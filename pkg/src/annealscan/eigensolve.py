"""Iterative low-end eigensolver and its dense oracle.

The workhorse is :func:`lowest_eigenpairs`, a restarted Krylov projection
with full reorthogonalization of the active basis (thick restart keeping the
best Ritz pairs).  Design points:

* smallest-algebraic target, subspace dimension ``max(2k + 4, 20)``;
* deterministic: the start vector and every enrichment vector come from a
  Philox stream keyed by ``seed``, so repeated runs bit-match;
* warm-startable from a previous step's eigenvectors;
* one fresh random direction is injected per restart cycle and convergence
  is only declared after two consecutive converged cycles with stable
  values.  A single Krylov chain cannot see more than one copy of a
  degenerate eigenvalue, and several reference problems carry exact
  multiplets (complete-graph ferromagnet, Hamming-weight problem, the bare
  transverse-field driver), so the enrichment is what resolves multiplicity.

There is no dense production path; :func:`dense_spectrum` exists as a test
oracle for small registers and is built independently of the matrix-free
code (Kronecker products).
"""

from __future__ import annotations

import numpy as np

from .hamiltonian import HamiltonianSpec, materialize_dense, DENSE_MAX_QUBITS

DEFAULT_SOLVER_SEED = 0x5EED
_BREAKDOWN = 1e-10  # relative norm below which a candidate is numerically dependent

# Ritz values closer than this (relative to max(1, |E|)) are treated as one
# degenerate cluster when aligning the returned basis to a warm start.
DEGENERACY_RTOL = 1e-11


class EigensolverError(RuntimeError):
    """Raised when the iteration exhausts its restart budget.

    Carries the best residual norms achieved so callers can report how far
    from converged the run ended up.
    """

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


def lowest_eigenpairs(matvec, dimension: int, k: int, tol: float = 1e-9,
                      initial_subspace: np.ndarray | None = None,
                      seed: int = DEFAULT_SOLVER_SEED,
                      dtype=np.float64,
                      max_cycles: int = 500,
                      split_gauge=None):
    """Lowest-algebraic eigenpairs of a symmetric (Hermitian) operator.

    Parameters
    ----------
    matvec : callable
        Applies the operator to one vector of length ``dimension``.
    dimension : int
        Operator dimension (2^n for a register of n qubits).
    k : int
        Number of requested eigenpairs, ``1 <= k <= dimension``.
    tol : float
        Residual target: ``||H v - E v|| <= tol * max(1, |E|)`` per pair.
    initial_subspace : ndarray, optional
        ``(dimension, j)`` warm-start block, e.g. the previous sweep step's
        eigenvectors.  Rank-deficient columns are dropped.
    seed : int
        Key for the Philox stream that supplies the start vector and the
        per-cycle enrichment directions.
    dtype : numpy dtype
        float64 for real-symmetric operators, complex128 when the operator
        carries Y factors.
    split_gauge : callable, optional
        Applies a second operator to a ``(dimension, j)`` block, column by
        column.  On a cold start (no warm subspace) each degenerate cluster
        of eigenvectors is rotated to diagonalize this operator restricted
        to the cluster, and ordered by the restricted eigenvalues.  Passing
        the parameter derivative of a parametrized operator makes the
        returned basis the one whose members connect continuously to the
        split levels at a nearby parameter value.  Ignored on warm starts,
        where alignment to the previous basis takes precedence.

    Returns
    -------
    (energies, vectors, residuals)
        Energies ascending, vectors orthonormal in the columns of a
        ``(dimension, k)`` array, and the achieved residual norms.

    Raises
    ------
    ValueError
        If ``k`` is out of range.
    EigensolverError
        If the restart budget is exhausted before convergence.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > dimension:
        raise ValueError(f"k = {k} exceeds the operator dimension {dimension}")

    rng = np.random.Generator(np.random.Philox(seed))
    is_complex = np.issubdtype(np.dtype(dtype), np.complexfloating)
    m = min(max(2 * k + 4, 20), dimension)
    keep = min(k + 4, m - 2) if m < dimension else min(k + 4, dimension)

    basis = np.zeros((dimension, m), dtype=dtype)
    image = np.zeros((dimension, m), dtype=dtype)  # image[:, i] = H basis[:, i]
    size = 0

    def random_vector():
        v = rng.standard_normal(dimension)
        if is_complex:
            v = v + 1j * rng.standard_normal(dimension)
        return v.astype(dtype, copy=False)

    def append(candidate) -> bool:
        """Orthonormalize against the basis and extend it; False on breakdown."""
        nonlocal size
        v = np.asarray(candidate, dtype=dtype).copy()
        ref = np.linalg.norm(v)
        if ref == 0.0:
            return False
        for _ in range(2):  # two-pass Gram-Schmidt keeps the basis orthonormal
            if size:
                v -= basis[:, :size] @ (basis[:, :size].conj().T @ v)
        nrm = np.linalg.norm(v)
        if nrm <= _BREAKDOWN * ref:
            return False
        basis[:, size] = v / nrm
        image[:, size] = matvec(basis[:, size])
        size += 1
        return True

    if initial_subspace is not None:
        warm = np.atleast_2d(np.asarray(initial_subspace))
        if warm.shape[0] != dimension:
            warm = warm.T
        for col in range(min(warm.shape[1], m - 2 if m < dimension else m)):
            append(warm[:, col])
    if size == 0 and not append(random_vector()):
        raise EigensolverError("could not seed the Krylov basis")

    steer: np.ndarray | None = None
    previous_values: np.ndarray | None = None
    last_residuals = None

    for _ in range(max_cycles):
        # --- grow the basis: steering residual, Krylov chain, then one
        #     fresh random direction in the final slot of every cycle
        injected = False
        while size < m:
            if steer is not None:
                candidate, steer = steer, None
            elif size == m - 1 and not injected:
                candidate = random_vector()
                injected = True
            else:
                candidate = image[:, size - 1]  # chain: H applied to the newest
            if not append(candidate):
                if injected:
                    break
                injected = True
                if not append(random_vector()):
                    break  # basis spans an invariant subspace of full rank

        # --- Rayleigh-Ritz on the current basis
        proj = basis[:, :size].conj().T @ image[:, :size]
        proj = (proj + proj.conj().T) / 2.0
        values, rotation = np.linalg.eigh(proj)

        # Retain a few pairs past the window, and widen further so the
        # retained block never cuts through a degenerate cluster: gauge
        # alignment needs the whole multiplet span, not a slice of it.
        cluster_tol = DEGENERACY_RTOL * max(1.0, float(np.abs(values).max()))
        want = min(max(keep, k), size)
        while want < size and values[want] - values[want - 1] <= cluster_tol:
            want += 1
        ritz = basis[:, :size] @ rotation[:, :want]
        ritz_image = image[:, :size] @ rotation[:, :want]

        nk = min(k, size)
        resid = ritz_image - ritz * values[:want]
        residuals = np.linalg.norm(resid, axis=0)
        scale = np.maximum(1.0, np.abs(values[:want]))

        if size >= dimension:
            # the basis spans the full space: Rayleigh-Ritz is exact
            if initial_subspace is not None:
                ritz = _align_clusters(values[:want], ritz, initial_subspace, k)
            elif split_gauge is not None:
                ritz = _orient_clusters(values[:want], ritz, split_gauge, k)
            return values[:k].copy(), ritz[:, :k], residuals[:k].copy()

        # Full tolerance must cover the window plus the tail of any
        # degenerate cluster its boundary cuts (those directions mix into
        # the returned gauge).  The first pair past them is a sentinel: it
        # only has to certify that the cluster truly ends, which the bound
        # |lambda_true - lambda_ritz| <= ||r|| gives once its residual is a
        # fraction of the observed gap.  A multiplet member still sinking
        # toward the cluster cannot pass that test - its residual stays
        # comparable to the distance left to sink - so convergence cannot
        # be declared while a cluster member is missing from the basis.
        need = nk
        boundary_ok = True
        if nk == k and k < dimension:
            while (need < want
                   and values[need] - values[need - 1] <= cluster_tol):
                need += 1
            if need < want:
                gap = values[need] - values[need - 1]
                boundary_ok = residuals[need] <= max(tol * scale[need],
                                                     0.125 * gap)
        converged = residuals[:need] <= tol * scale[:need]
        last_residuals = residuals[:need]

        if nk == k and boundary_ok and np.all(converged):
            if previous_values is not None and np.all(
                np.abs(values[:k] - previous_values) <= tol * scale[:k]
            ):
                if initial_subspace is not None:
                    ritz = _align_clusters(values[:want], ritz,
                                           initial_subspace, k)
                elif split_gauge is not None:
                    ritz = _orient_clusters(values[:want], ritz,
                                            split_gauge, k)
                return values[:k].copy(), ritz[:, :k], residuals[:k].copy()
            previous_values = values[:k].copy()
        else:
            previous_values = None

        # --- thick restart: keep the best Ritz pairs, steer with the
        #     residual of the lowest unconverged pair (or the uncertified
        #     sentinel once the required block has converged)
        unconverged = np.nonzero(~converged)[0]
        if unconverged.size:
            steer = resid[:, unconverged[0]].copy()
        elif not boundary_ok:
            steer = resid[:, need].copy()
        else:
            steer = None
        new_size = min(want, size, m - 2)
        basis[:, :new_size] = ritz[:, :new_size]
        image[:, :new_size] = ritz_image[:, :new_size]
        size = new_size

    raise EigensolverError(
        f"no convergence within {max_cycles} restart cycles; "
        f"worst residual {float(np.max(last_residuals)):.3e}",
        residuals=last_residuals,
    )


def _align_clusters(values: np.ndarray, ritz: np.ndarray,
                    warm: np.ndarray | None, k: int) -> np.ndarray:
    """Rotate degenerate Ritz clusters onto the warm-start vectors.

    Inside a (numerically) degenerate eigenspace any orthonormal basis is an
    equally valid answer, and LAPACK picks an arbitrary one - which would
    make the returned slice of an exact multiplet churn from call to call.
    When a warm start is available, the window's slice of each cluster is
    replaced by the orthonormalized projection of the corresponding warm
    vectors onto the cluster span (a gauge choice; values are untouched).
    Clusters extending past position k matter: they let the window slice
    follow the warm subspace even when the window cuts a multiplet.
    """
    if warm is None:
        return ritz
    warm = np.atleast_2d(np.asarray(warm))
    if warm.shape[0] != ritz.shape[0]:
        warm = warm.T
    if warm.shape[1] < min(k, ritz.shape[1]):
        return ritz
    tol = DEGENERACY_RTOL * max(1.0, float(np.abs(values).max()))
    start = 0
    n_vals = len(values)
    while start < min(k, n_vals):
        stop = start + 1
        while stop < n_vals and values[stop] - values[stop - 1] <= tol:
            stop += 1
        width = min(stop, k) - start
        if stop - start > 1 and width >= 1:
            cluster = ritz[:, start:stop]
            length = stop - start
            # Greedy per-slot alignment in cluster coordinates: each warm
            # column keeps its slot when enough of it lies in the cluster
            # span.  A warm state that has left the span (a branch exiting
            # the window through the multiplet) leaves a hole instead of
            # poisoning the whole rotation; holes are filled afterwards
            # with deterministic complement directions - the entering
            # branches.
            coeffs = cluster.conj().T @ warm[:, start:start + width]
            taken = np.zeros((length, 0), dtype=cluster.dtype)
            slots: list[np.ndarray | None] = [None] * width
            for col in range(width):
                p = coeffs[:, col].copy()
                if taken.shape[1]:
                    p -= taken @ (taken.conj().T @ p)
                nrm = np.linalg.norm(p)
                if nrm >= 0.5:
                    q = p / nrm
                    slots[col] = q
                    taken = np.hstack([taken, q[:, None]])
            holes = [col for col in range(width) if slots[col] is None]
            if holes:
                full, _ = np.linalg.qr(
                    np.hstack([taken, np.eye(length, dtype=cluster.dtype)])
                )
                spare = full[:, taken.shape[1]:length]
                for col, q in zip(holes, spare.T):
                    slots[col] = q
            rotated = cluster @ np.column_stack(slots)
            for col in holes:
                lead = np.argmax(np.abs(rotated[:, col]))
                pivot = rotated[lead, col]
                if abs(pivot) > 0.0:
                    rotated[:, col] *= np.conj(pivot) / abs(pivot)
            ritz[:, start:start + width] = rotated
        start = stop
    return ritz


def _orient_clusters(values: np.ndarray, ritz: np.ndarray,
                     apply_block, k: int) -> np.ndarray:
    """Orient degenerate Ritz clusters by a secondary operator.

    Each cluster's basis is rotated to diagonalize ``apply_block``'s
    operator restricted to the cluster span, ordered by the restricted
    eigenvalues.  With the parameter derivative of the operator as the
    secondary, the cluster columns become the states that connect
    continuously to the split levels at a nearby parameter value, in the
    energy order they will take there.  Directions the secondary leaves
    degenerate stay in an arbitrary (deterministic) gauge, which is
    harmless: to first order they do not split.
    """
    tol = DEGENERACY_RTOL * max(1.0, float(np.abs(values).max()))
    start = 0
    n_vals = len(values)
    while start < min(k, n_vals):
        stop = start + 1
        while stop < n_vals and values[stop] - values[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            cluster = ritz[:, start:stop]
            moved = np.asarray(apply_block(cluster))
            restricted = cluster.conj().T @ moved
            restricted = (restricted + restricted.conj().T) / 2.0
            _, rotation = np.linalg.eigh(restricted)
            ritz[:, start:stop] = cluster @ rotation
        start = stop
    return ritz


def dense_spectrum(spec: HamiltonianSpec, eigenvectors: bool = False):
    """Full spectrum by dense diagonalization; the oracle for small registers.

    Refuses registers above ``DENSE_MAX_QUBITS`` (dense cost grows as 8^n).
    Eigenvalues ascending; eigenvectors in columns when requested.
    """
    if spec.n_qubits > DENSE_MAX_QUBITS:
        raise ValueError(
            f"dense diagonalization capped at {DENSE_MAX_QUBITS} qubits, "
            f"got {spec.n_qubits}"
        )
    matrix = materialize_dense(spec)
    if eigenvectors:
        return np.linalg.eigh(matrix)
    return np.linalg.eigvalsh(matrix)


def dense_anneal_spectrum(hi: HamiltonianSpec, hp: HamiltonianSpec,
                          schedule, s: float, eigenvectors: bool = False):
    """Dense spectrum of A(s) H_I + B(s) H_P; oracle helper for sweeps."""
    a, b, _, _ = schedule.evaluate(s)
    matrix = a * materialize_dense(hi) + b * materialize_dense(hp)
    if eigenvectors:
        return np.linalg.eigh(matrix)
    return np.linalg.eigvalsh(matrix)
