"""Reference problem generators and their classical oracles.

Every stochastic generator draws from numpy's Philox4x64-10 counter-based
bit generator keyed with the instance seed, with a documented draw order, so
an (algorithm, seed) pair pins the instance on any platform.

Families
--------
ferromagnet   -J sum_(i,j) z_i z_j - h sum_i z_i on a complete graph
sk            -sum_{i<j} J_ij z_i z_j - sum_k h_k z_k, couplings scaled so
              the classical ground energy stays extensive
hamming       energy = number of set bits; closed-form spectrum at every s
mqo           multi-query optimization plan selection, via a QUBO
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import (HamiltonianSpec, PauliTerm, QuboSpec,
                          index_to_bitstring, qubo_to_ising)


def _philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# spin-glass style generators
# ---------------------------------------------------------------------------

def gen_fim(n: int, coupling: float = 1.0, fld: float = 0.0) -> HamiltonianSpec:
    """Ferromagnetic Ising model on the complete graph.

        H = -coupling * sum_{i<j} z_i z_j - fld * sum_i z_i

    Deterministic.  With fld = 0 the ground level is two-fold degenerate
    (all-up / all-down); any fld > 0 selects all-up (all bits 0).
    Terms are written couplings first (pair order), then fields.
    """
    if n < 2:
        raise ValueError("ferromagnet needs at least 2 spins")
    terms = [
        PauliTerm(-coupling, (("Z", i), ("Z", j)))
        for i in range(n) for j in range(i + 1, n)
    ]
    if fld != 0.0:
        terms += [PauliTerm(-fld, (("Z", i),)) for i in range(n)]
    return HamiltonianSpec(n, tuple(terms))


def gen_sk(n: int, seed: int, dist: str = "gaussian", field_scale: float = 1.0,
           pin: bool = False) -> HamiltonianSpec:
    """Sherrington-Kirkpatrick instance with optional random fields and pinning.

        H = -sum_{i<j} J_ij z_i z_j - sum_k h_k z_k

    Couplings have standard deviation 1/sqrt(n): gaussian N(0, 1/n) or
    uniform on [-sqrt(3)/sqrt(n), +sqrt(3)/sqrt(n)].  Fields are i.i.d. from
    the same family with standard deviation ``field_scale`` (no 1/sqrt(n):
    fields are local).  Draw order: couplings in pair order (0,1), (0,2), ...,
    (n-2,n-1), then fields 0..n-1; fields are drawn even when field_scale = 0
    so the stream layout does not depend on parameters.

    ``pin=True`` adds 2 * (sum_j |J_0j| + |h_0|) to the spin-0 field, which
    makes every classical state with z_0 = -1 strictly higher in energy than
    its flipped counterpart.
    """
    if n < 2:
        raise ValueError("sk needs at least 2 spins")
    if dist not in ("gaussian", "uniform"):
        raise ValueError(f"unknown distribution {dist!r}")
    rng = _philox(seed)
    n_pairs = n * (n - 1) // 2
    if dist == "gaussian":
        couplings = rng.standard_normal(n_pairs) / math.sqrt(n)
        fields = rng.standard_normal(n) * field_scale
    else:
        half = math.sqrt(3.0) / math.sqrt(n)
        couplings = rng.uniform(-half, half, n_pairs)
        fields = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), n) * field_scale

    if pin:
        j0_sum = sum(abs(couplings[k]) for k, (i, _) in enumerate(_pair_order(n)) if i == 0)
        fields[0] += 2.0 * (j0_sum + abs(fields[0]))

    terms = [
        PauliTerm(-float(couplings[k]), (("Z", i), ("Z", j)))
        for k, (i, j) in enumerate(_pair_order(n))
    ]
    terms += [
        PauliTerm(-float(h), (("Z", i),)) for i, h in enumerate(fields) if h != 0.0
    ]
    return HamiltonianSpec(n, tuple(terms))


def _pair_order(n: int):
    for i in range(n):
        for j in range(i + 1, n):
            yield i, j


def gen_hw(n: int) -> HamiltonianSpec:
    """Hamming-weight problem: classical energy = number of set bits.

    Per-spin terms -0.5 Z_i plus the constant offset 0.5 n, so the classical
    spectrum is exactly {0, 1, ..., n}.  Under a linear schedule with a
    unit-strength driver the instantaneous spectrum separates per qubit; the
    ground energy is  n * (s/2 - sqrt(s^2/4 + (1-s)^2))  and the first gap
    2 * sqrt(s^2/4 + (1-s)^2)  attains its minimum 2/sqrt(5) at s = 0.8.
    """
    if n < 1:
        raise ValueError("hamming needs at least 1 spin")
    terms = tuple(PauliTerm(-0.5, (("Z", i),)) for i in range(n))
    return HamiltonianSpec(n, terms, constant_offset=0.5 * n)


def hw_ground_energy(n: int, s) -> np.ndarray:
    """Closed-form ground energy of gen_hw(n) under the linear schedule."""
    s = np.asarray(s, dtype=float)
    return n * (s / 2.0 - np.sqrt(s * s / 4.0 + (1.0 - s) ** 2))


def hw_first_gap(s) -> np.ndarray:
    """Closed-form first gap of the Hamming-weight problem (any n)."""
    s = np.asarray(s, dtype=float)
    return 2.0 * np.sqrt(s * s / 4.0 + (1.0 - s) ** 2)


# ---------------------------------------------------------------------------
# multi-query optimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MQOInstance:
    """Plan-selection instance: pick exactly one plan per query.

    Plans are numbered 0..P-1; query q owns the contiguous block
    ``plans[q]``.  ``savings`` maps inter-query plan pairs (p, q), p < q, to
    the cost saved when both are selected.  The selection cost is

        sum_p cost[p]  -  sum_{(p,q) selected} savings[(p,q)]
    """

    plans: tuple[tuple[int, ...], ...]
    costs: tuple[float, ...]
    savings: dict[tuple[int, int], float] = field(default_factory=dict)
    density: float = 0.0

    def __post_init__(self):
        owner = {}
        for q, block in enumerate(self.plans):
            if not block:
                raise ValueError(f"query {q} has no plans")
            for p in block:
                if p in owner:
                    raise ValueError(f"plan {p} assigned to two queries")
                owner[p] = q
        if sorted(owner) != list(range(len(self.costs))):
            raise ValueError("plan ids must be exactly 0..P-1")
        for (a, b), s in self.savings.items():
            if not a < b:
                raise ValueError(f"savings key {(a, b)} must be ordered")
            if owner[a] == owner[b]:
                raise ValueError(f"savings pair {(a, b)} lies within one query")
            if s < 0:
                raise ValueError("savings must be non-negative")

    @property
    def n_plans(self) -> int:
        return len(self.costs)

    @property
    def n_queries(self) -> int:
        return len(self.plans)


def gen_mqo(n_queries: int, plans_per_query: int, density: float,
            seed: int) -> MQOInstance:
    """Random plan-selection instance.

    Costs are uniform integers in [1, 20] drawn per plan in id order.  Out of
    the M = C(n_queries, 2) * plans_per_query^2 inter-query pairs,
    ``ceil(density * M)`` are drawn without replacement (pair list in
    lexicographic order) and given uniform integer savings in [1, 5], each
    clamped to min(cost_i, cost_j).  Draw order: costs, pair choice, values.
    """
    if n_queries < 2 or plans_per_query < 1:
        raise ValueError("need at least two queries and one plan per query")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    rng = _philox(seed)
    n_plans = n_queries * plans_per_query
    plans = tuple(
        tuple(range(q * plans_per_query, (q + 1) * plans_per_query))
        for q in range(n_queries)
    )
    costs = tuple(float(c) for c in rng.integers(1, 21, size=n_plans))
    pairs = [
        (a, b)
        for qa in range(n_queries) for qb in range(qa + 1, n_queries)
        for a in plans[qa] for b in plans[qb]
    ]
    n_draw = math.ceil(density * len(pairs))
    chosen = rng.choice(len(pairs), size=n_draw, replace=False) if n_draw else []
    values = rng.integers(1, 6, size=n_draw)
    savings = {}
    for k, val in zip(chosen, values):
        a, b = pairs[int(k)]
        savings[(a, b)] = float(min(float(val), costs[a], costs[b]))
    return MQOInstance(plans, costs, dict(sorted(savings.items())), density)


def sample_mqo_4x2() -> MQOInstance:
    """Fixed four-query, two-plans-each instance with a known optimum.

    Greedy per-query picking (cheapest plan per query, savings applied after
    the fact) lands on plans (0, 2, 5, 7) at cost 34, while the optimum is
    (1, 3, 4, 6) at cost 25 - a handy regression anchor because the two
    differ on every query.
    """
    costs = (9.0, 10.0, 9.0, 10.0, 11.0, 9.0, 14.0, 9.0)
    savings = {
        (0, 2): 1.0, (0, 3): 1.0,
        (1, 2): 1.0, (1, 3): 5.0, (1, 6): 5.0,
        (3, 4): 5.0,
        (4, 6): 5.0, (4, 7): 1.0,
        (5, 6): 1.0, (5, 7): 1.0,
    }
    return MQOInstance(((0, 1), (2, 3), (4, 5), (6, 7)), costs, savings, 10 / 24)


def mqo_cost(instance: MQOInstance, selection) -> float:
    """Cost of one selection (iterable holding exactly one plan per query)."""
    chosen = sorted(set(int(p) for p in selection))
    per_query = [0] * instance.n_queries
    owner = {p: q for q, block in enumerate(instance.plans) for p in block}
    for p in chosen:
        if p not in owner:
            raise ValueError(f"unknown plan {p}")
        per_query[owner[p]] += 1
    if any(c != 1 for c in per_query):
        raise ValueError("selection must pick exactly one plan per query")
    total = sum(instance.costs[p] for p in chosen)
    for i, a in enumerate(chosen):
        for b in chosen[i + 1:]:
            total -= instance.savings.get((a, b), 0.0)
    return total


def mqo_optimum(instance: MQOInstance) -> tuple[tuple[int, ...], float]:
    """Exhaustive optimum over all one-per-query selections (small instances)."""
    best_sel, best_cost = None, math.inf
    def walk(q, picked):
        nonlocal best_sel, best_cost
        if q == instance.n_queries:
            c = mqo_cost(instance, picked)
            if c < best_cost:
                best_sel, best_cost = tuple(picked), c
            return
        for p in instance.plans[q]:
            walk(q + 1, picked + [p])
    walk(0, [])
    return best_sel, best_cost


def mqo_to_qubo(instance: MQOInstance, penalty: float | None = None) -> QuboSpec:
    """Encode plan selection as a QUBO over x_p (one binary per plan).

        C(x) = sum_p c_p x_p - sum_{pq} s_pq x_p x_q
               + penalty * sum_q (sum_{p in P_q} x_p - 1)^2

    The default penalty 1 + sum(costs) + sum(savings) exceeds any possible
    objective swing, so every minimizer selects exactly one plan per query
    and the QUBO minimum equals the selection optimum.
    """
    if penalty is None:
        penalty = 1.0 + sum(instance.costs) + sum(instance.savings.values())
    linear: dict[int, float] = {}
    quadratic: dict[tuple[int, int], float] = {}
    for p, c in enumerate(instance.costs):
        linear[p] = c - penalty  # x^2 = x absorbs the squared linear piece
    for (a, b), s in instance.savings.items():
        quadratic[(a, b)] = quadratic.get((a, b), 0.0) - s
    for block in instance.plans:
        for i, a in enumerate(block):
            for b in block[i + 1:]:
                quadratic[(a, b)] = quadratic.get((a, b), 0.0) + 2.0 * penalty
    offset = penalty * instance.n_queries
    quadratic = {k: v for k, v in sorted(quadratic.items()) if v != 0.0}
    linear = {k: v for k, v in linear.items() if v != 0.0}
    return QuboSpec(instance.n_plans, linear, quadratic, offset)


def decode_selection(instance: MQOInstance, bitstring: str) -> tuple[int, ...]:
    """Plans whose bit is set, in id order (bit i of the string is plan i)."""
    return tuple(p for p, b in enumerate(bitstring) if b == "1")


# ---------------------------------------------------------------------------
# classical oracle
# ---------------------------------------------------------------------------

CLASSICAL_MAX_QUBITS = 24
_CHUNK = 1 << 20


def classical_ground_state(spec: HamiltonianSpec) -> tuple[str, float]:
    """Exhaustive ground state of a diagonal spec.

    Returns (bitstring, energy) with the bitstring written qubit 0 first;
    exact energy ties resolve to the lexicographically smallest bitstring.
    Evaluates term-by-term over the full basis (chunked), independent of the
    matrix-free operator code.  Refuses non-diagonal specs and registers
    above 24 qubits.
    """
    if not spec.is_diagonal():
        raise ValueError("classical enumeration requires a diagonal spec")
    if spec.n_qubits > CLASSICAL_MAX_QUBITS:
        raise ValueError(
            f"enumeration capped at {CLASSICAL_MAX_QUBITS} qubits, got {spec.n_qubits}"
        )
    dim = spec.dimension
    best_energy = math.inf
    candidates: list[int] = []
    for start in range(0, dim, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, dim), dtype=np.int64)
        energies = np.full(idx.shape, spec.constant_offset, dtype=np.float64)
        for term in spec.terms:
            contrib = np.full(idx.shape, term.coefficient)
            for _, q in term.factors:
                contrib *= 1.0 - 2.0 * ((idx >> q) & 1)
            energies += contrib
        lo = float(energies.min())
        if lo < best_energy:
            best_energy = lo
            candidates = [int(i) for i in idx[energies == lo]]
        elif lo == best_energy:
            candidates += [int(i) for i in idx[energies == lo]]
    n = spec.n_qubits
    best = min(candidates, key=lambda i: index_to_bitstring(i, n))
    return index_to_bitstring(best, n), best_energy


def classical_energy(spec: HamiltonianSpec, index: int,
                     include_offset: bool = True) -> float:
    """Diagonal energy of one basis state."""
    if not spec.is_diagonal():
        raise ValueError("classical energy requires a diagonal spec")
    total = spec.constant_offset if include_offset else 0.0
    for term in spec.terms:
        val = term.coefficient
        for _, q in term.factors:
            val *= 1.0 - 2.0 * ((index >> q) & 1)
        total += val
    return total


# ---------------------------------------------------------------------------
# CLI-facing parameter bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorParams:
    """Everything needed to rebuild one generated instance."""

    family: str  # "fim" | "sk" | "hw" | "mqo"
    n: int = 0
    seed: int = 0
    coupling: float = 1.0
    fld: float = 0.0
    dist: str = "gaussian"
    field_scale: float = 1.0
    pin: bool = False
    queries: int = 0
    plans: int = 0
    density: float = 0.0

    def build(self) -> HamiltonianSpec:
        if self.family == "fim":
            return gen_fim(self.n, self.coupling, self.fld)
        if self.family == "sk":
            return gen_sk(self.n, self.seed, self.dist, self.field_scale, self.pin)
        if self.family == "hw":
            return gen_hw(self.n)
        if self.family == "mqo":
            inst = gen_mqo(self.queries, self.plans, self.density, self.seed)
            spec, _ = qubo_to_ising(mqo_to_qubo(inst))
            return spec
        raise ValueError(f"unknown family {self.family!r}")

    def metadata(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}
