"""Terms, term files, QUBO mapping, schedules, matrix-free application.

The matrix-free operator is checked against dense matrices built by
Kronecker products, which share no code with the bitmask application
path.
"""

import math

import numpy as np
import pytest

from annealscan.hamiltonian import (
    AnnealOperator,
    CompiledOperator,
    HamiltonianSpec,
    LINEAR_SCHEDULE,
    PauliTerm,
    QuboSpec,
    Schedule,
    TermFormatError,
    apply_hamiltonian,
    bitstring_to_index,
    index_to_bitstring,
    make_driver,
    materialize_dense,
    parse_hamiltonian,
    parse_schedule,
    qubo_to_ising,
    serialize_hamiltonian,
    sign_table,
    spin_values,
)

RNG = np.random.default_rng(2024_08_16)


def random_spec(rng, n, n_terms, axes="XYZ"):
    terms = []
    for _ in range(n_terms):
        arity = int(rng.integers(1, 3)) if n > 1 else 1
        qubits = rng.choice(n, size=arity, replace=False)
        factors = tuple((axes[int(rng.integers(len(axes)))], int(q))
                        for q in qubits)
        terms.append(PauliTerm(float(rng.normal()), factors))
    offset = float(rng.normal())
    return HamiltonianSpec(n, tuple(terms), constant_offset=offset)


# ---------------------------------------------------------------------------
# terms and specs
# ---------------------------------------------------------------------------

class TestPauliTerm:
    def test_rejects_bad_axis(self):
        with pytest.raises(ValueError, match="axis"):
            PauliTerm(1.0, (("Q", 0),))

    def test_rejects_three_factors(self):
        with pytest.raises(ValueError, match="one or two"):
            PauliTerm(1.0, (("Z", 0), ("Z", 1), ("Z", 2)))

    def test_rejects_duplicate_qubit(self):
        with pytest.raises(ValueError, match="duplicate"):
            PauliTerm(1.0, (("Z", 3), ("X", 3)))

    def test_rejects_nonfinite_coefficient(self):
        with pytest.raises(ValueError, match="finite"):
            PauliTerm(math.inf, (("Z", 0),))

    def test_diagonal_detection(self):
        assert PauliTerm(1.0, (("Z", 0), ("Z", 2))).is_diagonal()
        assert not PauliTerm(1.0, (("Z", 0), ("X", 2))).is_diagonal()


class TestHamiltonianSpec:
    def test_register_bound_enforced(self):
        with pytest.raises(ValueError, match="register"):
            HamiltonianSpec(2, (PauliTerm(1.0, (("Z", 5),)),))

    def test_has_y(self):
        spec = HamiltonianSpec(2, (PauliTerm(1.0, (("Y", 0),)),))
        assert spec.has_y()
        assert not make_driver(2).has_y()

    def test_coefficient_sum_bounds_operator_norm(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            spec = random_spec(rng, 4, 6)
            dense = materialize_dense(spec)
            norm = np.linalg.norm(dense, 2)
            assert norm <= spec.coefficient_sum() + 1e-12


# ---------------------------------------------------------------------------
# term-file format
# ---------------------------------------------------------------------------

class TestTermFormat:
    def test_parse_basic(self):
        spec = parse_hamiltonian("-1.2 Z 0 Z 1\n0.5 X 2\n", 3)
        assert spec.terms == (
            PauliTerm(-1.2, (("Z", 0), ("Z", 1))),
            PauliTerm(0.5, (("X", 2),)),
        )

    def test_comments_and_blanks_ignored(self):
        text = "# header\n\n1 Z 0  # trailing\n"
        spec = parse_hamiltonian(text, 1)
        assert len(spec.terms) == 1

    def test_roundtrip_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            spec = random_spec(rng, 5, 8)
            again = parse_hamiltonian(serialize_hamiltonian(spec), 5)
            assert again.terms == spec.terms

    def test_repeated_lines_kept_and_summed_on_apply(self):
        spec = parse_hamiltonian("1 Z 0\n1 Z 0\n", 1)
        assert len(spec.terms) == 2
        v = np.array([1.0, 1.0])
        out = CompiledOperator(spec).apply(v)
        np.testing.assert_allclose(out, [2.0, -2.0])

    @pytest.mark.parametrize("text,what", [
        ("1 Z", "tokens"),
        ("x Z 0", "coefficient"),
        ("1 W 0", "axis"),
        ("1 Z zero", "qubit index"),
        ("1 Z 9", "outside"),
        ("1 Z 0 X 0", "duplicate"),
        ("inf Z 0", "non-finite"),
    ])
    def test_parse_errors_carry_line_number(self, text, what):
        with pytest.raises(TermFormatError, match="line 1") as err:
            parse_hamiltonian(text, 4)
        assert what in str(err.value)


# ---------------------------------------------------------------------------
# QUBO mapping
# ---------------------------------------------------------------------------

class TestQubo:
    def test_mapping_matches_enumeration(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            linear = {i: float(rng.normal()) for i in range(n)}
            quadratic = {(i, j): float(rng.normal())
                         for i in range(n) for j in range(i + 1, n)
                         if rng.random() < 0.7}
            qubo = QuboSpec(n, linear, quadratic, offset=float(rng.normal()))
            spec, _ = qubo_to_ising(qubo)
            diag = np.diagonal(materialize_dense(spec))
            for index in range(1 << n):
                bits = [(index >> i) & 1 for i in range(n)]
                assert diag[index] == pytest.approx(qubo.evaluate(bits), abs=1e-12)

    def test_index_bound_validation(self):
        with pytest.raises(ValueError):
            QuboSpec(2, linear={5: 1.0})
        with pytest.raises(ValueError):
            QuboSpec(2, quadratic={(1, 0): 1.0})


# ---------------------------------------------------------------------------
# driver and schedules
# ---------------------------------------------------------------------------

class TestDriver:
    def test_spectrum_is_even_ladder(self):
        # closed form: eigenvalues -gamma*(n - 2w), w = 0..n
        for n, gamma in ((3, 1.0), (4, 2.5)):
            values = np.linalg.eigvalsh(materialize_dense(make_driver(n, gamma)))
            expected = sorted(-gamma * (n - 2 * w) for w in range(n + 1)
                              for _ in range(math.comb(n, w)))
            np.testing.assert_allclose(values, expected, atol=1e-12)

    def test_rejects_nonpositive_gamma(self):
        with pytest.raises(ValueError):
            make_driver(3, 0.0)


class TestSchedule:
    def test_linear_values(self):
        a, b, da, db = LINEAR_SCHEDULE.evaluate(0.25)
        assert (a, b, da, db) == (0.75, 0.25, -1.0, 1.0)

    def test_tabulated_interpolation_and_slopes(self):
        sched = Schedule("tabulated", ((0.0, 1.0, 0.0), (0.5, 0.6, 0.3),
                                       (1.0, 0.0, 1.0)))
        a, b, da, db = sched.evaluate(0.25)
        assert a == pytest.approx(0.8)
        assert b == pytest.approx(0.15)
        assert da == pytest.approx(-0.8)
        assert db == pytest.approx(0.6)
        # s = 1 falls back to the last segment's slope
        _, _, da1, _ = sched.evaluate(1.0)
        assert da1 == pytest.approx(-1.2)

    def test_parse_schedule(self):
        sched = parse_schedule("0 1 0\n0.5 0.5 0.5 # mid\n1 0 1\n")
        assert sched.evaluate(0.5)[:2] == (0.5, 0.5)

    def test_knot_validation(self):
        with pytest.raises(ValueError):
            Schedule("tabulated", ((0.0, 1.0, 0.0), (0.4, 0.5, 0.5)))

    def test_out_of_range_s(self):
        with pytest.raises(ValueError):
            LINEAR_SCHEDULE.evaluate(1.5)


# ---------------------------------------------------------------------------
# basis helpers
# ---------------------------------------------------------------------------

class TestBasis:
    def test_bitstring_roundtrip(self):
        for index in range(16):
            assert bitstring_to_index(index_to_bitstring(index, 4)) == index

    def test_spin_convention(self):
        # bit 0 means Z eigenvalue +1
        np.testing.assert_array_equal(spin_values(0b010, 3), [1, -1, 1])

    def test_sign_table_matches_spins(self):
        table = sign_table(3)
        for index in range(8):
            np.testing.assert_array_equal(table[:, index], spin_values(index, 3))


# ---------------------------------------------------------------------------
# matrix-free application against the dense oracle
# ---------------------------------------------------------------------------

class TestCompiledOperator:
    def test_matches_dense_on_random_specs(self):
        rng = np.random.default_rng(37)
        for trial in range(25):
            n = int(rng.integers(1, 6))
            spec = random_spec(rng, n, int(rng.integers(1, 10)))
            dense = materialize_dense(spec)
            compiled = CompiledOperator(spec)
            v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
            np.testing.assert_allclose(compiled.apply(v), dense @ v,
                                       atol=1e-12, rtol=1e-12)

    def test_real_workload_stays_real(self):
        spec = random_spec(np.random.default_rng(5), 4, 6, axes="XZ")
        out = CompiledOperator(spec).apply(np.ones(16))
        assert out.dtype == np.float64

    def test_y_terms_force_complex(self):
        spec = HamiltonianSpec(2, (PauliTerm(1.0, (("Y", 0),)),))
        compiled = CompiledOperator(spec)
        assert compiled.dtype == np.complex128
        dense = materialize_dense(spec)
        v = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(compiled.apply(v), dense @ v, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            CompiledOperator(make_driver(3)).apply(np.ones(4))


class TestAnnealOperator:
    def test_interpolation_matches_dense(self):
        rng = np.random.default_rng(41)
        hi = make_driver(4, 1.3)
        hp = random_spec(rng, 4, 6, axes="Z")
        op = AnnealOperator(hi, hp)
        dense_hi = materialize_dense(hi)
        dense_hp = materialize_dense(hp)
        v = rng.normal(size=16)
        for s in (0.0, 0.3, 1.0):
            expected = ((1 - s) * dense_hi + s * dense_hp) @ v
            np.testing.assert_allclose(op.apply(s, v), expected, atol=1e-12)
            np.testing.assert_allclose(op.matvec_at(s)(v), expected, atol=1e-12)
            np.testing.assert_allclose(apply_hamiltonian(hi, hp, LINEAR_SCHEDULE, s, v),
                                       expected, atol=1e-12)

    def test_derivative_matches_dense(self):
        rng = np.random.default_rng(43)
        hi = make_driver(3)
        hp = random_spec(rng, 3, 4, axes="Z")
        op = AnnealOperator(hi, hp)
        expected = (materialize_dense(hp) - materialize_dense(hi)) @ np.ones(8)
        np.testing.assert_allclose(op.apply_ds(0.4, np.ones(8)), expected,
                                   atol=1e-12)

    def test_register_mismatch_rejected(self):
        with pytest.raises(ValueError, match="register"):
            AnnealOperator(make_driver(3), make_driver(4))

    def test_offsets_scale_with_schedule(self):
        hp = HamiltonianSpec(2, (PauliTerm(-0.5, (("Z", 0),)),),
                             constant_offset=1.0)
        op = AnnealOperator(make_driver(2), hp)
        v = np.zeros(4)
        v[0] = 1.0
        # at s = 1 the ground energy includes the full offset
        assert op.apply(1.0, v)[0] == pytest.approx(0.5)
        # at s = 0.5 only half of it
        diag_part = op.apply(0.5, v)[0]
        assert diag_part == pytest.approx(0.5 * (-0.5) + 0.5 * 1.0)
