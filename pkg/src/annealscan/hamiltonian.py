"""Pauli-term Hamiltonians, annealing schedules and matrix-free application.

Conventions used throughout the package
---------------------------------------
Basis states of an ``n``-qubit register are indexed by integers
``b in [0, 2**n)``.  Bit ``i`` of ``b`` encodes qubit ``i`` (little-endian),
bit value 0 corresponds to the ``Z`` eigenvalue +1, and the classical spin
value of qubit ``i`` is ``z_i = 1 - 2*bit_i(b)``.

A Hamiltonian is a weighted sum of one- and two-qubit Pauli products plus an
optional constant offset,

    H = sum_t  c_t * P(t)  +  offset * I,

and an annealing run interpolates two of them,

    H(s) = A(s) * H_I  +  B(s) * H_P,        s in [0, 1].

The text format for term lists is one term per line,
``coeff axis index [axis index]``, e.g. ``-1.2 Z 0 Z 1``.  Blank lines and
lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

PAULI_AXES = ("X", "Y", "Z")

# Pauli matrices in the (bit=0, bit=1) basis, used by the dense oracle.
_PAULI_DENSE = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}

DENSE_MAX_QUBITS = 12


class TermFormatError(ValueError):
    """Raised when a Hamiltonian term listing cannot be parsed."""


@dataclass(frozen=True)
class PauliTerm:
    """One weighted Pauli product acting on one or two qubits.

    Parameters
    ----------
    coefficient : float
        Real weight of the product.  Must be finite.
    factors : tuple of (axis, qubit)
        One or two factors; ``axis`` is one of ``"X"``, ``"Y"``, ``"Z"`` and
        the qubit indices within one term must be distinct.
    """

    coefficient: float
    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not math.isfinite(self.coefficient):
            raise ValueError(f"non-finite coefficient {self.coefficient!r}")
        if len(self.factors) not in (1, 2):
            raise ValueError("a term must hold one or two Pauli factors")
        qubits = []
        for axis, qubit in self.factors:
            if axis not in PAULI_AXES:
                raise ValueError(f"unknown Pauli axis {axis!r}")
            if not isinstance(qubit, (int, np.integer)) or isinstance(qubit, bool):
                raise ValueError(f"qubit index must be an integer, got {qubit!r}")
            if qubit < 0:
                raise ValueError(f"negative qubit index {qubit}")
            qubits.append(int(qubit))
        if len(qubits) == 2 and qubits[0] == qubits[1]:
            raise ValueError(f"duplicate qubit {qubits[0]} within one term")

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.factors)

    def is_diagonal(self) -> bool:
        return all(axis == "Z" for axis, _ in self.factors)


@dataclass(frozen=True)
class HamiltonianSpec:
    """A sum of Pauli terms on a fixed register plus a constant offset."""

    n_qubits: int
    terms: tuple[PauliTerm, ...]
    constant_offset: float = 0.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be at least 1")
        if not math.isfinite(self.constant_offset):
            raise ValueError("constant offset must be finite")
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            for _, qubit in term.factors:
                if qubit >= self.n_qubits:
                    raise ValueError(
                        f"term acts on qubit {qubit} but the register has "
                        f"{self.n_qubits} qubits"
                    )

    @property
    def dimension(self) -> int:
        return 1 << self.n_qubits

    def is_diagonal(self) -> bool:
        return all(term.is_diagonal() for term in self.terms)

    def has_y(self) -> bool:
        return any(axis == "Y" for term in self.terms for axis, _ in term.factors)

    def coefficient_sum(self) -> float:
        """Sum of |coefficient| plus |offset|; an operator-norm bound."""
        return sum(abs(t.coefficient) for t in self.terms) + abs(self.constant_offset)


# ---------------------------------------------------------------------------
# term-list text format
# ---------------------------------------------------------------------------

def parse_hamiltonian(text: str, n_qubits: int) -> HamiltonianSpec:
    """Parse a term listing into a :class:`HamiltonianSpec`.

    One term per line, ``coeff axis index [axis index]``; ``#`` starts a
    comment and blank lines are skipped.  Repeated identical products are kept
    as separate terms (they sum when the operator is applied).

    Raises
    ------
    TermFormatError
        On malformed lines, unknown axes, bad or out-of-range indices, or a
        non-finite coefficient.  The message carries the 1-based line number.
    """
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (3, 5):
            raise TermFormatError(
                f"line {lineno}: expected 'coeff axis index [axis index]', "
                f"got {len(tokens)} tokens"
            )
        try:
            coeff = float(tokens[0])
        except ValueError:
            raise TermFormatError(f"line {lineno}: bad coefficient {tokens[0]!r}") from None
        if not math.isfinite(coeff):
            raise TermFormatError(f"line {lineno}: non-finite coefficient {tokens[0]!r}")
        factors = []
        for axis, idx_tok in zip(tokens[1::2], tokens[2::2]):
            if axis not in PAULI_AXES:
                raise TermFormatError(f"line {lineno}: unknown axis {axis!r}")
            try:
                qubit = int(idx_tok)
            except ValueError:
                raise TermFormatError(f"line {lineno}: bad qubit index {idx_tok!r}") from None
            if qubit < 0 or qubit >= n_qubits:
                raise TermFormatError(
                    f"line {lineno}: qubit index {qubit} outside [0, {n_qubits})"
                )
            factors.append((axis, qubit))
        if len(factors) == 2 and factors[0][1] == factors[1][1]:
            raise TermFormatError(f"line {lineno}: duplicate qubit {factors[0][1]}")
        terms.append(PauliTerm(coeff, tuple(factors)))
    return HamiltonianSpec(n_qubits, tuple(terms))


def serialize_hamiltonian(spec: HamiltonianSpec) -> str:
    """Render a spec in the term-list text format.

    Coefficients are printed with 17 significant digits, which round-trips
    float64 exactly: ``parse(serialize(spec))`` reproduces every term.
    The constant offset is not part of the format and travels in run metadata.
    """
    lines = []
    for term in spec.terms:
        parts = [f"{term.coefficient:.17g}"]
        for axis, qubit in term.factors:
            parts.append(axis)
            parts.append(str(qubit))
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# QUBO -> Ising
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuboSpec:
    """Quadratic binary cost, C(x) = sum_i a_i x_i + sum_{i<j} b_ij x_i x_j + const."""

    n_vars: int
    linear: dict[int, float] = field(default_factory=dict)
    quadratic: dict[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("n_vars must be at least 1")
        for i in self.linear:
            if not 0 <= i < self.n_vars:
                raise ValueError(f"linear index {i} out of range")
        for i, j in self.quadratic:
            if not (0 <= i < j < self.n_vars):
                raise ValueError(f"quadratic key {(i, j)} must satisfy 0 <= i < j < n")

    def evaluate(self, bits) -> float:
        """Cost of one assignment; ``bits[i]`` is x_i in {0, 1}."""
        total = self.offset
        for i, a in self.linear.items():
            total += a * bits[i]
        for (i, j), b in self.quadratic.items():
            total += b * bits[i] * bits[j]
        return total


def qubo_to_ising(qubo: QuboSpec) -> tuple[HamiltonianSpec, float]:
    """Map a QUBO onto a diagonal Ising spec via x_i = (1 - z_i) / 2.

    Returns the spec and the accumulated constant offset.  The offset is also
    stored on the spec, so its classical energies already include it:
    evaluating the spec's terms on a bitstring and adding the offset equals
    the QUBO cost of that bitstring.  Zero coefficients are dropped; linear
    terms come first, ordered by index, then quadratic terms ordered by pair.
    """
    h = {i: 0.0 for i in range(qubo.n_vars)}
    offset = qubo.offset
    for i, a in qubo.linear.items():
        h[i] -= a / 2.0
        offset += a / 2.0
    couplings = {}
    for (i, j), b in sorted(qubo.quadratic.items()):
        couplings[(i, j)] = b / 4.0
        h[i] -= b / 4.0
        h[j] -= b / 4.0
        offset += b / 4.0
    terms = [PauliTerm(h[i], (("Z", i),)) for i in sorted(h) if h[i] != 0.0]
    terms += [
        PauliTerm(c, (("Z", i), ("Z", j)))
        for (i, j), c in couplings.items()
        if c != 0.0
    ]
    return HamiltonianSpec(qubo.n_vars, tuple(terms), constant_offset=offset), offset


def make_driver(n_qubits: int, gamma: float = 1.0) -> HamiltonianSpec:
    """Uniform transverse-field driver, H = -gamma * sum_i X_i.

    Its ground state is the uniform superposition with energy ``-gamma * n``
    and the spectrum is ``{-gamma * (n - 2w) : w = 0..n}``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    terms = tuple(PauliTerm(-gamma, (("X", i),)) for i in range(n_qubits))
    return HamiltonianSpec(n_qubits, terms)


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Annealing schedule (A(s), B(s)) on s in [0, 1].

    ``linear`` is A = 1 - s, B = s.  A tabulated schedule interpolates the
    knots piecewise-linearly; derivatives are the slope of the segment to the
    right of s (to the left at s = 1).
    """

    kind: str = "linear"
    table: tuple[tuple[float, float, float], ...] | None = None

    def __post_init__(self):
        if self.kind == "linear":
            if self.table is not None:
                raise ValueError("linear schedule takes no table")
            return
        if self.kind != "tabulated":
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        table = tuple(tuple(float(x) for x in row) for row in (self.table or ()))
        if len(table) < 2:
            raise ValueError("tabulated schedule needs at least two knots")
        if any(len(row) != 3 for row in table):
            raise ValueError("each knot must be (s, A, B)")
        s_vals = [row[0] for row in table]
        if any(b <= a for a, b in zip(s_vals, s_vals[1:])):
            raise ValueError("knot positions must be strictly increasing")
        if s_vals[0] != 0.0 or s_vals[-1] != 1.0:
            raise ValueError("knots must cover [0, 1] exactly")
        object.__setattr__(self, "table", table)

    def evaluate(self, s: float) -> tuple[float, float, float, float]:
        """Return (A, B, dA/ds, dB/ds) at s.  s must lie in [0, 1]."""
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"s = {s} outside [0, 1]")
        if self.kind == "linear":
            return 1.0 - s, s, -1.0, 1.0
        knots = [row[0] for row in self.table]
        seg = bisect_right(knots, s) - 1
        if seg >= len(knots) - 1:  # s == 1.0: use the last segment
            seg = len(knots) - 2
        s0, a0, b0 = self.table[seg]
        s1, a1, b1 = self.table[seg + 1]
        width = s1 - s0
        da = (a1 - a0) / width
        db = (b1 - b0) / width
        return a0 + da * (s - s0), b0 + db * (s - s0), da, db


LINEAR_SCHEDULE = Schedule("linear")


def schedule_eval(schedule: Schedule, s: float) -> tuple[float, float, float, float]:
    """Evaluate (A, B, dA/ds, dB/ds); see :meth:`Schedule.evaluate`."""
    return schedule.evaluate(s)


def parse_schedule(text: str) -> Schedule:
    """Parse a tabulated schedule, one ``s A B`` triple per line."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 3:
            raise TermFormatError(f"line {lineno}: expected 's A B'")
        try:
            rows.append(tuple(float(t) for t in tokens))
        except ValueError:
            raise TermFormatError(f"line {lineno}: bad number in {line!r}") from None
    return Schedule("tabulated", tuple(rows))


# ---------------------------------------------------------------------------
# basis helpers
# ---------------------------------------------------------------------------

def index_to_bits(index: int, n_qubits: int) -> np.ndarray:
    """Bit values (qubit 0 first) of one basis index."""
    return (index >> np.arange(n_qubits)) & 1


def index_to_bitstring(index: int, n_qubits: int) -> str:
    """Bitstring with qubit 0 leftmost, e.g. index 2 on 3 qubits -> '010'."""
    return "".join(str(b) for b in index_to_bits(index, n_qubits))


def bitstring_to_index(bits: str) -> int:
    return sum(1 << i for i, b in enumerate(bits) if b == "1")


def spin_values(index: int, n_qubits: int) -> np.ndarray:
    """Classical spins z_i = 1 - 2 * bit_i for one basis index."""
    return 1 - 2 * index_to_bits(index, n_qubits)


def sign_table(n_qubits: int) -> np.ndarray:
    """(n, 2^n) array of z_i over the whole basis, float64."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    bits = (idx[None, :] >> np.arange(n_qubits)[:, None]) & 1
    return 1.0 - 2.0 * bits


# ---------------------------------------------------------------------------
# matrix-free application
# ---------------------------------------------------------------------------

class CompiledOperator:
    """One spec compiled for matrix-free application.

    All diagonal content (Z-only terms plus the constant offset) collapses
    into a single vector; every off-diagonal term keeps its flip mask and the
    qubit lists that contribute signs (Z factors) and imaginary phases
    (Y factors).  Applying a term T with flip mask m to v is the gather

        (T v)[c] = coeff * phase(c XOR m) * v[c XOR m].

    Storage is O(2^n) regardless of the number of terms.
    """

    def __init__(self, spec: HamiltonianSpec):
        self.spec = spec
        self.n_qubits = spec.n_qubits
        self.dimension = spec.dimension
        self.has_y = spec.has_y()
        self.dtype = np.complex128 if self.has_y else np.float64

        idx = np.arange(self.dimension, dtype=np.int64)
        diag = np.full(self.dimension, spec.constant_offset, dtype=np.float64)
        flips = []
        for term in spec.terms:
            if term.is_diagonal():
                contrib = np.full(self.dimension, term.coefficient)
                for _, q in term.factors:
                    contrib *= 1.0 - 2.0 * ((idx >> q) & 1)
                diag += contrib
            else:
                mask = 0
                z_qubits, y_qubits = [], []
                for axis, q in term.factors:
                    if axis == "Z":
                        z_qubits.append(q)
                    else:
                        mask |= 1 << q
                        if axis == "Y":
                            y_qubits.append(q)
                flips.append((term.coefficient, mask, tuple(z_qubits), tuple(y_qubits)))
        self.diag = diag
        self.flips = flips
        self._idx = idx

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return H v for one state vector (real or complex, length 2^n)."""
        if v.shape != (self.dimension,):
            raise ValueError(
                f"vector has shape {v.shape}, operator dimension is {self.dimension}"
            )
        out_dtype = np.result_type(v.dtype, self.dtype)
        w = self.diag * v
        if w.dtype != out_dtype:
            w = w.astype(out_dtype)
        for coeff, mask, z_qubits, y_qubits in self.flips:
            src = self._idx ^ mask
            amp = v[src] * coeff
            for q in z_qubits:
                amp *= 1.0 - 2.0 * ((src >> q) & 1)
            for q in y_qubits:
                amp = amp * (1j * (1.0 - 2.0 * ((src >> q) & 1)))
            w += amp
        return w


class AnnealOperator:
    """Interpolated operator H(s) = A(s) H_I + B(s) H_P, applied matrix-free.

    Both specs must act on the same register.  Constant offsets scale with
    their schedule weight, so generator-built problems keep their classical
    energy landscape at s = 1.
    """

    def __init__(self, hi: HamiltonianSpec, hp: HamiltonianSpec,
                 schedule: Schedule = LINEAR_SCHEDULE):
        if hi.n_qubits != hp.n_qubits:
            raise ValueError(
                f"register mismatch: driver has {hi.n_qubits} qubits, "
                f"problem has {hp.n_qubits}"
            )
        self.hi = CompiledOperator(hi)
        self.hp = CompiledOperator(hp)
        self.schedule = schedule
        self.n_qubits = hi.n_qubits
        self.dimension = hi.dimension
        self.dtype = (np.complex128 if (self.hi.has_y or self.hp.has_y)
                      else np.float64)

    def apply(self, s: float, v: np.ndarray) -> np.ndarray:
        a, b, _, _ = self.schedule.evaluate(s)
        return a * self.hi.apply(v) + b * self.hp.apply(v)

    def apply_ds(self, s: float, v: np.ndarray) -> np.ndarray:
        """Apply dH/ds = A'(s) H_I + B'(s) H_P."""
        _, _, da, db = self.schedule.evaluate(s)
        return da * self.hi.apply(v) + db * self.hp.apply(v)

    def matvec_at(self, s: float):
        """Fixed-s closure suitable for the eigensolver."""
        a, b, _, _ = self.schedule.evaluate(s)
        hi, hp = self.hi, self.hp
        if not hi.flips and not hp.flips:
            diag = a * hi.diag + b * hp.diag
            return lambda v: diag * v
        return lambda v: a * hi.apply(v) + b * hp.apply(v)


def apply_hamiltonian(hi: HamiltonianSpec, hp: HamiltonianSpec,
                      schedule: Schedule, s: float, v: np.ndarray) -> np.ndarray:
    """One-shot H(s) v.  For sweeps, build an :class:`AnnealOperator` once."""
    return AnnealOperator(hi, hp, schedule).apply(s, v)


# ---------------------------------------------------------------------------
# dense oracle
# ---------------------------------------------------------------------------

def materialize_dense(spec: HamiltonianSpec) -> np.ndarray:
    """Dense matrix of a spec, built by Kronecker products.

    Intentionally independent of :class:`CompiledOperator` so it can serve as
    an oracle for the matrix-free path.  Refuses registers above
    ``DENSE_MAX_QUBITS``.
    """
    n = spec.n_qubits
    if n > DENSE_MAX_QUBITS:
        raise ValueError(
            f"dense construction capped at {DENSE_MAX_QUBITS} qubits, got {n}"
        )
    dtype = np.complex128 if spec.has_y() else np.float64
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=dtype)
    for term in spec.terms:
        axes = {qubit: axis for axis, qubit in term.factors}
        op = np.array([[1.0]])
        # qubit i owns bit i of the index, so it is the *later* kron factor
        for q in range(n - 1, -1, -1):
            op = np.kron(op, _PAULI_DENSE[axes.get(q, "I")])
        out += term.coefficient * op.astype(dtype)
    out += spec.constant_offset * np.eye(dim, dtype=dtype)
    return out
