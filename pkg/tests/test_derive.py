"""Gap series, sub-grid refinement, matrix elements, adiabatic ratio.

The refinement formula is checked against exact parabolas whose vertex is
known by construction; matrix elements are checked against closed-form
derivatives and central differences of independently computed energies.
"""

import math

import numpy as np
import pytest

from annealscan.derived import (DEGENERATE_GAP, GapSeries,
                                MatrixElementSeries, MinGapSummary,
                                adiabatic_ratio, ensemble_summary, gaps,
                                matrix_elements, min_gap)
from annealscan.hamiltonian import (HamiltonianSpec, PauliTerm, make_driver,
                                    materialize_dense)
from annealscan.problems import gen_fim, gen_hw, gen_sk
from annealscan.sweep import (SpectralSnapshot, SpectralSweep, SweepConfig,
                              sweep, track_branches)


def synthetic_sweep(s_grid, energies):
    """Wrap an explicit (steps, nev) energy table as a sweep result."""
    energies = np.asarray(energies, dtype=float)
    steps, nev = energies.shape
    config = SweepConfig(nev=nev, s_steps=max(steps, 2))
    snaps = [
        SpectralSnapshot(s=float(s), energies=energies[t],
                         residual_norms=np.zeros(nev))
        for t, s in enumerate(s_grid)
    ]
    return SpectralSweep(config=config, n_qubits=1, snapshots=snaps)


# ---------------------------------------------------------------------------
# gap series
# ---------------------------------------------------------------------------

class TestGapSeries:
    def test_spacing_arithmetic(self):
        result = synthetic_sweep([0.0, 1.0], [[-3.0, -1.0, 0.0],
                                              [-2.0, -1.5, 1.0]])
        series = gaps(result)
        np.testing.assert_allclose(series.from_ground[0], [2.0, 3.0])
        np.testing.assert_allclose(series.consecutive[0], [2.0, 1.0])
        np.testing.assert_allclose(series.delta_10, [2.0, 0.5])
        assert series.n_levels == 3

    def test_needs_two_levels(self):
        result = synthetic_sweep([0.0, 1.0], [[1.0], [2.0]])
        with pytest.raises(ValueError, match="nev >= 2"):
            gaps(result)


# ---------------------------------------------------------------------------
# minimum gap with refinement
# ---------------------------------------------------------------------------

def parabola_series(s0, depth, curvature, grid):
    grid = np.asarray(grid)
    delta = curvature * (grid - s0) ** 2 + depth
    return GapSeries(s_grid=grid, from_ground=delta[:, None],
                     consecutive=delta[:, None])


class TestMinGap:
    def test_recovers_exact_parabola_vertex(self):
        # three samples of a true parabola determine it exactly, so the
        # refined minimum must hit the analytic vertex to rounding
        grid = np.linspace(0.0, 1.0, 11)
        summary = min_gap(parabola_series(0.43, 0.2, 3.0, grid))
        assert summary.s_star == pytest.approx(0.43, abs=1e-12)
        assert summary.dmin == pytest.approx(0.2, abs=1e-12)
        assert summary.dmin_raw > summary.dmin
        assert summary.s_star_raw == pytest.approx(0.4)

    def test_refined_never_exceeds_raw(self):
        rng = np.random.default_rng(7)
        grid = np.linspace(0.0, 1.0, 41)
        for _ in range(50):
            s0 = rng.uniform(0.1, 0.9)
            summary = min_gap(parabola_series(
                s0, rng.uniform(0.0, 0.5), rng.uniform(0.5, 20.0), grid))
            assert summary.dmin <= summary.dmin_raw + 1e-12
            assert summary.dmin >= 0.0
            assert abs(summary.s_star - summary.s_star_raw) <= 0.025 + 1e-12

    def test_boundary_minimum_skips_refinement(self):
        grid = np.linspace(0.0, 1.0, 11)
        series = GapSeries(grid, (2.0 - grid)[:, None], (2.0 - grid)[:, None])
        summary = min_gap(series)
        assert summary.dmin == summary.dmin_raw == pytest.approx(1.0)
        assert summary.s_star == summary.s_star_raw == pytest.approx(1.0)

    def test_v_shaped_crossing_clamps_at_zero(self):
        # an exact level crossing sampled off-center: the parabola vertex
        # would dive negative, the summary must not
        grid = np.linspace(0.0, 1.0, 21)
        delta = np.abs(grid - 0.33)
        series = GapSeries(grid, delta[:, None], delta[:, None])
        summary = min_gap(series)
        assert 0.0 <= summary.dmin <= summary.dmin_raw
        assert grid[0] <= summary.s_star <= grid[-1]

    def test_degenerate_flag(self):
        grid = np.linspace(0.0, 1.0, 5)
        delta = np.array([1.0, 0.5, 0.0, 0.5, 1.0])
        series = GapSeries(grid, delta[:, None], delta[:, None])
        summary = min_gap(series)
        assert summary.degenerate
        assert summary.dmin <= DEGENERATE_GAP

    def test_labels_pass_through(self):
        series = parabola_series(0.5, 0.3, 1.0, np.linspace(0, 1, 5))
        summary = min_gap(series, instance="sk-n6-seed3", n_qubits=6, seed=3)
        assert summary.instance == "sk-n6-seed3"
        assert summary.n_qubits == 6
        assert summary.seed == 3

    def test_closed_form_instance(self):
        result = sweep(make_driver(4), gen_hw(4),
                       config=SweepConfig(nev=2, s_steps=200))
        summary = min_gap(gaps(result))
        assert summary.dmin == pytest.approx(2 / math.sqrt(5), abs=1e-3)
        assert summary.s_star == pytest.approx(0.8, abs=0.01)

    def test_gap_series_matches_dense(self):
        hi, hp = make_driver(4), gen_fim(4, fld=0.1)
        result = sweep(hi, hp, config=SweepConfig(nev=4, s_steps=21))
        series = gaps(result)
        dense_hi, dense_hp = materialize_dense(hi), materialize_dense(hp)
        for t, s in enumerate(series.s_grid):
            evs = np.linalg.eigvalsh((1 - s) * dense_hi + s * dense_hp)
            np.testing.assert_allclose(series.from_ground[t],
                                       evs[1:4] - evs[0], atol=1e-6)


# ---------------------------------------------------------------------------
# matrix elements
# ---------------------------------------------------------------------------

class TestMatrixElements:
    def test_h_is_diagonal_with_sweep_energies(self):
        hi, hp = make_driver(3), gen_sk(3, seed=5)
        result = sweep(hi, hp, config=SweepConfig(nev=3, s_steps=9,
                                                  save_eigenvectors=True))
        elements = matrix_elements(result, hi, hp)
        energies = result.energy_matrix()
        for t in range(9):
            h = elements.h_elements[t]
            np.testing.assert_allclose(np.diag(h).real, energies[t], atol=1e-8)
            off = h - np.diag(np.diag(h))
            assert np.abs(off).max() < 1e-8

    def test_m_is_hermitian(self):
        hi, hp = make_driver(3), gen_sk(3, seed=6)
        result = sweep(hi, hp, config=SweepConfig(nev=3, s_steps=9,
                                                  save_eigenvectors=True))
        elements = matrix_elements(result, hi, hp)
        for m in elements.m_elements:
            np.testing.assert_allclose(m, m.conj().T, atol=1e-8)

    def test_diagonal_matches_energy_derivative_closed_form(self):
        # single spin: E_0(s) = s/2 - sqrt(s^2/4 + (1-s)^2), so <0|dH/ds|0>
        # must equal dE_0/ds by the eigenvalue derivative identity
        hi, hp = make_driver(1), gen_hw(1)
        result = sweep(hi, hp, config=SweepConfig(nev=2, s_steps=101,
                                                  save_eigenvectors=True))
        elements = matrix_elements(result, hi, hp)
        s = result.s_grid
        g = s * s / 4 + (1 - s) ** 2
        dE0 = 0.5 - (s / 2 - 2 * (1 - s)) / (2 * np.sqrt(g))
        np.testing.assert_allclose(elements.m_elements[:, 0, 0].real, dE0,
                                   atol=1e-9)

    def test_diagonal_matches_central_differences(self):
        hi, hp = make_driver(4), gen_fim(4, fld=0.3)
        result = sweep(hi, hp, config=SweepConfig(nev=2, s_steps=201,
                                                  s_start=0.05,
                                                  save_eigenvectors=True))
        elements = matrix_elements(result, hi, hp)
        energies = result.energy_matrix()
        h = result.s_grid[1] - result.s_grid[0]
        for level in (0, 1):
            numeric = (energies[2:, level] - energies[:-2, level]) / (2 * h)
            analytic = elements.m_elements[1:-1, level, level].real
            np.testing.assert_allclose(analytic, numeric,
                                       atol=5e-4 * (1 + np.abs(analytic).max()))

    def test_branch_order_straightens_a_crossing(self):
        # two diagonal operators: sorted energies kink at the crossing,
        # branch-ordered diagonals are straight lines
        hi = HamiltonianSpec(1, (PauliTerm(-1.0, (("Z", 0),)),))
        hp = HamiltonianSpec(1, (PauliTerm(1.0, (("Z", 0),)),))
        result = sweep(hi, hp, config=SweepConfig(nev=2, s_steps=21,
                                                  track_by_overlap=True,
                                                  save_eigenvectors=True))
        tracked = track_branches(result)
        elements = matrix_elements(result, hi, hp, tracked=tracked)
        assert elements.branch_order
        s = result.s_grid
        np.testing.assert_allclose(elements.h_elements[:, 0, 0].real,
                                   2 * s - 1, atol=1e-9)
        np.testing.assert_allclose(elements.h_elements[:, 1, 1].real,
                                   1 - 2 * s, atol=1e-9)
        # dH/ds = Hp - Hi = 2 Z0; each branch keeps a constant slope
        np.testing.assert_allclose(elements.m_elements[:, 0, 0].real,
                                   np.full(21, 2.0), atol=1e-9)

    def test_requires_eigenvectors(self):
        hi, hp = make_driver(2), gen_hw(2)
        result = sweep(hi, hp, config=SweepConfig(nev=2, s_steps=3))
        with pytest.raises(ValueError, match="eigenvector"):
            matrix_elements(result, hi, hp)

    def test_register_mismatch(self):
        hi, hp = make_driver(2), gen_hw(2)
        result = sweep(hi, hp, config=SweepConfig(nev=2, s_steps=3,
                                                  save_eigenvectors=True))
        with pytest.raises(ValueError, match="qubits"):
            matrix_elements(result, make_driver(3), gen_hw(3))


# ---------------------------------------------------------------------------
# adiabatic ratio
# ---------------------------------------------------------------------------

class TestAdiabaticRatio:
    @staticmethod
    def computed(nev=2, steps=41):
        hi, hp = make_driver(4), gen_hw(4)
        result = sweep(hi, hp, config=SweepConfig(nev=nev, s_steps=steps,
                                                  save_eigenvectors=True))
        series = gaps(result)
        elements = matrix_elements(result, hi, hp)
        return series, elements

    def test_identity_holds_pointwise(self):
        series, elements = self.computed()
        ratio = adiabatic_ratio(elements, series)
        np.testing.assert_allclose(ratio.ratio * np.square(ratio.delta_10),
                                   ratio.abs_m10, rtol=1e-12, atol=0)
        assert not ratio.flagged.any()

    def test_peak_sits_near_gap_minimum(self):
        series, elements = self.computed(steps=201)
        ratio = adiabatic_ratio(elements, series)
        s_peak = float(ratio.s_grid[int(np.argmax(ratio.ratio))])
        s_min = float(series.s_grid[int(np.argmin(series.delta_10))])
        assert abs(s_peak - s_min) < 0.05

    def test_flags_near_singular_points(self):
        grid = np.linspace(0, 1, 5)
        delta = np.array([1.0, 0.5, 1e-9, 0.5, 1.0])
        series = GapSeries(grid, delta[:, None], delta[:, None])
        elements_grid = np.zeros((5, 2, 2))
        elements_grid[:, 1, 0] = 1.0
        elements = MatrixElementSeries(grid, elements_grid.copy(),
                                       elements_grid)
        ratio = adiabatic_ratio(elements, series)
        np.testing.assert_array_equal(ratio.flagged,
                                      [False, False, True, False, False])
        assert np.isfinite(ratio.ratio[ratio.flagged]).all()  # recorded anyway

    def test_grid_mismatch_rejected(self):
        series, elements = self.computed()
        other = GapSeries(series.s_grid + 0.01, series.from_ground,
                          series.consecutive)
        with pytest.raises(ValueError, match="grid"):
            adiabatic_ratio(elements, other)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def summary(n, seed, dmin, s_star=0.5):
    return MinGapSummary(dmin_raw=dmin, s_star_raw=s_star, dmin=dmin,
                         s_star=s_star, instance=f"sk-n{n}-seed{seed}",
                         n_qubits=n, seed=seed)


class TestEnsembleSummary:
    def test_statistics_per_size(self):
        runs = [summary(4, 0, 0.5), summary(4, 1, 0.1), summary(4, 2, 0.9),
                summary(6, 0, 0.3), summary(6, 1, 0.2)]
        agg = ensemble_summary(runs)
        assert agg.sizes == (4, 6)
        four = agg.by_size[4]
        assert four.count == 3
        assert four.dmin_min == pytest.approx(0.1)
        assert four.dmin_median == pytest.approx(0.5)
        assert four.dmin_mean == pytest.approx(0.5)
        assert four.dmin_max == pytest.approx(0.9)
        assert four.hardest.instance == "sk-n4-seed1"
        assert four.easiest.instance == "sk-n4-seed2"
        assert four.typical.instance == "sk-n4-seed0"  # exactly at the mean

    def test_single_run(self):
        agg = ensemble_summary([summary(5, 7, 0.42)])
        stats = agg.by_size[5]
        assert stats.hardest is stats.easiest is stats.typical
        assert stats.dmin_median == pytest.approx(0.42)

    def test_ties_resolve_to_first(self):
        runs = [summary(4, 0, 0.2), summary(4, 1, 0.2)]
        stats = ensemble_summary(runs).by_size[4]
        assert stats.hardest.seed == 0
        assert stats.easiest.seed == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            ensemble_summary([])

    def test_sstar_median(self):
        runs = [summary(4, 0, 0.5, s_star=0.3), summary(4, 1, 0.6, s_star=0.7),
                summary(4, 2, 0.7, s_star=0.5)]
        assert ensemble_summary(runs).by_size[4].sstar_median == (
            pytest.approx(0.5))
