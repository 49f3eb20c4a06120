"""End-to-end acceptance checks.

Every check here exercises the shipped code paths against an independent
ground truth: dense diagonalization, closed forms, hand-worked instances,
or exhaustive enumeration.  Each one prints a PASS/FAIL line to the real
stdout so a plain pytest run doubles as a release checklist.

The frozen seeds were chosen by scanning dense spectra for instances whose
gap structure leaves clear numerical margin (no near-degeneracy sitting
exactly on a filter boundary); the scans live outside the package.
"""

import statistics
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from annealscan.cli import main
from annealscan.derived import adiabatic_ratio, gaps, matrix_elements, min_gap
from annealscan.eigensolve import dense_anneal_spectrum, lowest_eigenpairs
from annealscan.hamiltonian import (AnnealOperator, LINEAR_SCHEDULE,
                                    index_to_bitstring, make_driver,
                                    qubo_to_ising)
from annealscan.problems import (classical_ground_state, decode_selection,
                                 gen_fim, gen_hw, gen_mqo, gen_sk, mqo_cost,
                                 mqo_optimum, mqo_to_qubo, sample_mqo_4x2)
from annealscan.runstore import read_run, write_run
from annealscan.sweep import SweepConfig, sweep, track_branches


_CAPTURE_MANAGER = None


@pytest.fixture(autouse=True)
def _find_capture_manager(request):
    # pytest's default capture works at the file-descriptor level, so even
    # sys.__stdout__ is swallowed; the capture manager is the supported
    # way to emit the checklist lines during a plain `pytest -v` run.
    global _CAPTURE_MANAGER
    _CAPTURE_MANAGER = request.config.pluginmanager.getplugin(
        "capturemanager")
    yield


@contextmanager
def checklist(label):
    """Print one PASS/FAIL line per check, past pytest's capture."""
    note = {}

    def emit(status):
        detail = f"  ({note['detail']})" if "detail" in note else ""
        line = f"\n[acceptance] {status}  {label}{detail}"
        if _CAPTURE_MANAGER is not None:
            with _CAPTURE_MANAGER.global_and_fixture_disabled():
                print(line, flush=True)
        else:
            print(line, file=sys.__stdout__, flush=True)

    try:
        yield note
    except BaseException:
        emit("FAIL")
        raise
    emit("PASS")


def solve_at(hi, hp, s, k, tol=1e-12):
    op = AnnealOperator(hi, hp)
    return lowest_eigenpairs(op.matvec_at(s), op.dimension, k, tol=tol)


def test_01_iterative_solver_matches_dense_oracle():
    """Lowest-8 eigenvalues agree with dense diagonalization to 1e-8."""
    rng = np.random.default_rng(1234)
    mqo_shapes = [(2, 2), (3, 2), (2, 3), (3, 3), (5, 2)]
    with checklist("oracle equivalence, 20 instances x 5 points") as note:
        started = time.perf_counter()
        with threadpool_limits(limits=1):
            for idx in range(20):
                family = ("sk", "fim", "mqo")[idx % 3]
                if family == "sk":
                    n = int(rng.integers(4, 11))
                    hp = gen_sk(n, seed=int(rng.integers(0, 1000)))
                elif family == "fim":
                    n = int(rng.integers(4, 11))
                    hp = gen_fim(n, fld=float(rng.uniform(0.0, 0.5)))
                else:
                    queries, plans = mqo_shapes[
                        int(rng.integers(0, len(mqo_shapes)))]
                    instance = gen_mqo(queries, plans,
                                       float(rng.uniform(0.2, 0.8)),
                                       seed=int(rng.integers(0, 1000)))
                    hp, _ = qubo_to_ising(mqo_to_qubo(instance))
                    n = queries * plans
                hi = make_driver(n)
                for s in rng.uniform(0.0, 1.0, size=5):
                    reference = dense_anneal_spectrum(
                        hi, hp, LINEAR_SCHEDULE, s)[:8]
                    values, _, _ = solve_at(hi, hp, s, k=8, tol=1e-11)
                    assert np.abs(values - reference).max() <= 1e-8, (
                        f"{family} n={n} s={s}")
        elapsed = time.perf_counter() - started
        assert elapsed < 120.0
        note["detail"] = f"{elapsed:.0f}s single-threaded"


def test_02_uniform_field_closed_form():
    """The one-body problem reduces to a 2x2 block with a known spectrum."""
    with checklist("closed-form ground energy and minimum gap, n=4/8/12"):
        for n in (4, 8, 12):
            config = SweepConfig(nev=2, s_steps=200, tolerance=1e-11)
            result = sweep(make_driver(n), gen_hw(n), config=config)
            s = result.s_grid
            exact = n * (s / 2.0 - np.sqrt(s**2 / 4.0 + (1.0 - s) ** 2))
            e0 = result.energy_matrix()[:, 0]
            assert np.abs(e0 - exact).max() <= 1e-8
            summary = min_gap(gaps(result))
            assert abs(summary.dmin - 2.0 / np.sqrt(5.0)) <= 1e-3
            assert abs(summary.s_star - 0.80) <= 0.01


def test_03_driver_endpoint_spectrum():
    """At s=0 every problem sees only the driver: E0=-Gn, gap 2G."""
    cases = [
        (gen_fim(4, fld=0.1), 1.0),
        (gen_fim(6, fld=0.0), 2.5),
        (gen_sk(5, seed=3), 1.0),
        (gen_sk(8, seed=7, field_scale=0.5), 2.5),
        (gen_hw(6), 1.0),
        (qubo_to_ising(mqo_to_qubo(gen_mqo(2, 2, 0.5, seed=5)))[0], 1.0),
    ]
    with checklist("driver endpoint energies across families"):
        for hp, gamma in cases:
            n = hp.n_qubits
            values, _, _ = solve_at(make_driver(n, gamma=gamma), hp, 0.0, k=2)
            assert abs(values[0] + gamma * n) <= 1e-9
            assert abs((values[1] - values[0]) - 2.0 * gamma) <= 1e-9


def test_04_ferromagnet_ground_truth():
    """Ferromagnet endpoint energies and a single-peaked condition ratio."""
    with checklist("ferromagnet endpoints and ratio shape"):
        hi4 = make_driver(4)
        values, _, _ = solve_at(hi4, gen_fim(4, fld=0.1), 1.0, k=1)
        assert abs(values[0] + 6.4) <= 1e-9

        values, _, _ = solve_at(hi4, gen_fim(4, fld=0.0), 1.0, k=2)
        assert abs(values[0] + 6.0) <= 1e-9
        assert abs(values[1] + 6.0) <= 1e-9

        hi8, hp8 = make_driver(8), gen_fim(8, fld=0.1)
        config = SweepConfig(nev=2, s_steps=200, save_eigenvectors=True)
        result = sweep(hi8, hp8, config=config)
        ratio = adiabatic_ratio(matrix_elements(result, hi8, hp8),
                                gaps(result))
        assert not ratio.flagged.any()
        r = ratio.ratio
        peak = int(np.argmax(r))
        assert 0 < peak < len(r) - 1
        assert np.all(np.diff(r[:peak + 1]) > 0.0)
        assert np.all(np.diff(r[peak:]) <= 1e-12)


def test_05_query_plan_worked_example():
    """The 4-query/8-plan instance lands on its known optimum."""
    instance = sample_mqo_4x2()
    with checklist("plan-selection instance decodes to cost 25"):
        assert mqo_cost(instance, (0, 2, 5, 7)) == 34.0
        assert mqo_optimum(instance) == ((1, 3, 4, 6), 25.0)

        qubo = mqo_to_qubo(instance)
        hp, _ = qubo_to_ising(qubo)
        hi = make_driver(8)
        values, vectors, _ = solve_at(hi, hp, 1.0, k=1)
        assert abs(values[0] - 25.0) <= 1e-8
        winner = int(np.argmax(np.abs(vectors[:, 0]) ** 2))
        assert np.abs(vectors[winner, 0]) ** 2 >= 0.999
        assert decode_selection(
            instance, index_to_bitstring(winner, 8)) == (1, 3, 4, 6)

        # exhaustive check over all 2^8 assignments
        costs = [(qubo.evaluate([int(c) for c in index_to_bitstring(i, 8)]), i)
                 for i in range(256)]
        best_cost, best_index = min(costs)
        assert best_cost == 25.0
        assert decode_selection(
            instance, index_to_bitstring(best_index, 8)) == (1, 3, 4, 6)


def test_06_eigenvalue_derivative_consistency():
    """dE_n/ds equals the diagonal derivative matrix element.

    Central differences on a 200-point grid carry O(h^2 E''') truncation
    error, which blows past the tolerance near avoided crossings, so each
    level is checked where its bounding gaps stay clear of the crossing
    scale over the whole three-point stencil.
    """
    hi, hp = make_driver(8), gen_sk(8, seed=10)
    config = SweepConfig(nev=3, s_steps=200, save_eigenvectors=True)
    with checklist("derivative consistency on a frozen instance") as note:
        result = sweep(hi, hp, config=config)
        e = result.energy_matrix()
        s = result.s_grid
        elements = matrix_elements(result, hi, hp)
        counts = []
        for level, cut in ((0, 0.05), (1, 0.25)):
            tested = 0
            for t in range(1, len(s) - 1):
                stencil = (t - 1, t, t + 1)
                clear = all(e[u, 1] - e[u, 0] > cut for u in stencil)
                if level == 1:
                    clear = clear and all(
                        e[u, 2] - e[u, 1] > cut for u in stencil)
                if not clear:
                    continue
                tested += 1
                cdiff = (e[t + 1, level] - e[t - 1, level]) / (
                    s[t + 1] - s[t - 1])
                mnn = elements.m_elements[t, level, level].real
                assert abs(cdiff - mnn) <= 5e-4 * (1.0 + abs(mnn))
            counts.append(tested)
        assert counts[0] >= 190
        assert counts[1] >= 60
        note["detail"] = f"{counts[0]}+{counts[1]} grid points"


def test_07_spin_flip_symmetry_and_pinning():
    """Zero-field magnetizations vanish; a pinned spin polarizes."""
    with checklist("symmetry-clean magnetization and pinning"):
        # without fields the spectrum splits into spin-flip sectors, so
        # every resolvable ground state carries zero magnetization
        for seed in (1, 6):
            hp = gen_sk(6, seed=seed, field_scale=0.0)
            config = SweepConfig(nev=2, s_steps=200, tolerance=1e-13,
                                 track_observables=True)
            result = sweep(make_driver(6), hp, config=config)
            e = result.energy_matrix()
            resolvable = (e[:, 1] - e[:, 0]) > 1e-6
            assert resolvable.sum() >= 180
            z = np.array([snap.z_expect[0] for snap in result.snapshots])
            assert np.abs(z[resolvable]).max() <= 1e-6

        # a dominant field on spin 0 keeps its tracked ground-branch
        # magnetization pinned through the second half of the sweep
        hp = gen_sk(8, seed=27, pin=True)
        config = SweepConfig(nev=2, s_steps=200, save_eigenvectors=True,
                             track_observables=True)
        result = sweep(make_driver(8), hp, config=config)
        tracked = track_branches(result)
        assert tracked.lost_at[0] == -1
        for t, snap in enumerate(result.snapshots):
            if snap.s < 0.5:
                continue
            position = int(np.where(tracked.permutations[t] == 0)[0][0])
            assert snap.z_expect[position, 0] >= 0.99
        state, _ = classical_ground_state(hp)
        assert state[0] == "0"


def test_08_branch_tracking_through_window_exits():
    """Identity tracking with exactly the known window-exit events.

    The 8-level window holds an exactly degenerate seven-fold multiplet
    that singleton levels from other symmetry sectors cross at three grid
    steps.  At such a crossing the outgoing state has no continuation
    inside the window, so that one overlap reading is ~0 by construction;
    every other consecutive overlap stays high.
    """
    hi, hp = make_driver(8), gen_fim(8, fld=0.1)
    config = SweepConfig(nev=8, s_steps=200, save_eigenvectors=True)
    with checklist("branch tracking on the crossing-rich ferromagnet"):
        result = sweep(hi, hp, config=config)
        tracked = track_branches(result)

        identity = np.arange(8)
        assert all(np.array_equal(row, identity)
                   for row in tracked.permutations)

        exits = {(t, b)
                 for t in range(1, 200) for b in range(8)
                 if tracked.overlaps[t, b] < 0.9}
        assert exits == {(25, 2), (56, 3), (61, 3)}
        assert all(tracked.overlaps[t, b] < 0.5 for t, b in exits)
        assert list(tracked.lost_at) == [-1, -1, 25, 56, -1, -1, -1, -1]

        sorted_e = result.energy_matrix()
        branch_e = tracked.branch_energies(result)
        for t in range(200):
            assert np.array_equal(np.sort(branch_e[t]), sorted_e[t])


def test_09_ensemble_hardness_trend(tmp_path):
    """Median minimum gap shrinks with size over 30 seeds per size.

    Known to fail at this scale: the strict median ordering is a
    statistical claim about the hard-instance tail, and at n = 6/8/10
    with 30 instances the sampling error of a median (about +/-0.05 to
    0.08 here) exceeds the trend margin for every generator
    parameterization measured (coupling distributions gaussian/uniform,
    field scales 0.05 to 1.0, populations of 100-200 seeds).  Several
    parameterizations do show the decreasing trend in their population
    medians, so the physics and the pipeline are sound; the instance
    count is just too small to resolve it.  The check is kept at the
    documented invocation, asserting the property as stated, rather than
    silently switching to a seed window or parameter corner that happens
    to pass.
    """
    root = tmp_path / "trend"
    with checklist("ensemble trend, 90 runs") as note:
        started = time.perf_counter()
        rc = main(["ensemble", "-family", "sk", "-sizes", "6,8,10",
                   "-count", "30", "-seed", "1", "-threads", "8",
                   "-out", str(root)])
        elapsed = time.perf_counter() - started
        assert rc == 0
        assert elapsed < 1800.0

        lines = (root / "minima.csv").read_text().splitlines()
        header = lines[0].split(",")
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 90
        n_col = header.index("n")
        gap_col = header.index("dmin_refined")
        by_size = {}
        for row in rows:
            by_size.setdefault(int(row[n_col]), []).append(float(row[gap_col]))
        assert sorted(by_size) == [6, 8, 10]
        assert all(len(v) == 30 for v in by_size.values())
        medians = [statistics.median(by_size[n]) for n in (6, 8, 10)]
        note["detail"] = (f"{elapsed:.0f}s, medians "
                          + "/".join(f"{m:.3f}" for m in medians))
        assert medians[0] > medians[1] > medians[2], (
            "median dmin_refined not strictly decreasing with n: "
            + " ".join(f"n={n}: {m:.4f}"
                       for n, m in zip((6, 8, 10), medians)))


def test_10_run_persistence_round_trip(tmp_path):
    """A written run reads back with nothing lost to formatting."""
    hi, hp = make_driver(10), gen_sk(10, seed=4)
    config = SweepConfig(nev=8, s_steps=25, save_eigenvectors=True,
                         track_observables=True, track_zz=True)
    with checklist("persistence round trip at n=10"):
        result = sweep(hi, hp, config=config)
        tracked = track_branches(result)
        series = gaps(result)
        adiabatic = adiabatic_ratio(matrix_elements(result, hi, hp), series)
        minima = [min_gap(series, instance="sk-n10-seed4", n_qubits=10,
                          seed=4)]
        dest = tmp_path / "run"
        write_run(result, dest, tracked=tracked, gap_series=series,
                  adiabatic=adiabatic, minima=minima)

        loaded = read_run(dest)
        assert np.array_equal(loaded.sweep.s_grid, result.s_grid)
        assert np.array_equal(loaded.sweep.energy_matrix(),
                              result.energy_matrix())
        for got, want in zip(loaded.sweep.snapshots, result.snapshots):
            assert np.array_equal(got.eigenvectors, want.eigenvectors)
            assert np.array_equal(got.residual_norms, want.residual_norms)
            assert np.array_equal(got.z_expect, want.z_expect)
            assert np.array_equal(got.zz_corr, want.zz_corr)
        assert np.array_equal(loaded.tracked.permutations,
                              tracked.permutations)
        assert np.array_equal(loaded.tracked.overlaps, tracked.overlaps)
        assert np.array_equal(loaded.tracked.lost_at, tracked.lost_at)
        assert SweepConfig(**loaded.meta["config"]) == result.config
