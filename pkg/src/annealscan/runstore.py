"""On-disk run directories: layout, binary eigenvector files, CSV export.

A run directory is self-describing: ``meta.json`` records the format
version, tool version, sweep configuration, schedule, input digests and
seeds; the input term files travel with the run as ``hi.txt``/``hp.txt``;
series live in CSV files with fixed column schemas; eigenvectors live in
raw little-endian binary files, one per grid point.  A ``COMPLETE`` marker
is written last, so a directory without it is a partial run by definition.

Layout::

    run/
      meta.json            format/tool versions, config, digests, seeds
      hi.txt  hp.txt       input term files, verbatim
      spectrum.csv         s, E0..E{k-1}
      residuals.csv        s, r0..r{k-1}
      eigvecs/             step_0000.bin .. one file per grid point
      observables.csv      s, state, qubit, z          (optional)
      zz.csv               s, state, i, j, zz  (i <= j) (optional)
      tracking.csv         step, sorted_idx, branch_id, overlap (optional)
      derived.csv          s, Delta_10.., absM_10, R, flag_near_singular
      minima.csv           instance, n, seed, dmin_raw, dmin_refined, s_star
      ensemble.csv         per-size aggregate rows
      COMPLETE             completion marker, written last

All CSV floats are written with 17 significant digits, which round-trips
float64 exactly; the binary eigenvector payload is bit-exact by
construction.  Derived CSVs may be added to a completed run later (that is
the point of decoupled post-processing); the marker vouches for the sweep
payload, not for optional additions.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .derived import (AdiabaticSeries, EnsembleSummary, GapSeries,
                      MinGapSummary)
from .sweep import (SpectralSnapshot, SpectralSweep, SweepConfig,
                    TrackedBranches)

FORMAT_VERSION = "1.0"
TOOL_NAME = "annealscan"
TOOL_VERSION = "0.1.0"

EIGVEC_MAGIC = b"ANNEIG1\x00"
_HEADER = struct.Struct("<8siii")  # magic, n_qubits, nev, complex_flag

COMPLETE_MARKER = "COMPLETE"


class RunStoreError(RuntimeError):
    """Base class for persistence failures."""


class RunExistsError(RunStoreError):
    """Destination directory already holds a run and overwrite is off."""


class IncompleteRunError(RunStoreError):
    """Directory lacks the completion marker."""


class DigestMismatchError(RunStoreError):
    """Recorded input digest does not match the stored file."""


class FormatVersionError(RunStoreError):
    """Run was written by an incompatible major format version."""


class MissingSeriesError(RunStoreError):
    """A requested series is not present in the run."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise RunStoreError(f"{path.name} is empty")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


# ---------------------------------------------------------------------------
# eigenvector files
# ---------------------------------------------------------------------------

def write_eigvec_file(path: Path, vectors: np.ndarray, n_qubits: int) -> None:
    """Write one grid point's eigenvector block.

    ``vectors`` is (2^n, nev); columns are stored consecutively.  Complex
    data is stored as (re, im) float64 pairs, real data as plain float64,
    both little-endian.
    """
    dim, nev = vectors.shape
    if dim != 1 << n_qubits:
        raise ValueError(f"vector length {dim} does not match {n_qubits} qubits")
    complex_flag = 1 if np.iscomplexobj(vectors) else 0
    payload = np.ascontiguousarray(vectors.T).astype(
        "<c16" if complex_flag else "<f8", copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EIGVEC_MAGIC, n_qubits, nev, complex_flag))
        fh.write(payload.tobytes())


def read_eigvec_file(path: Path) -> np.ndarray:
    """Read one eigenvector block back as a (2^n, nev) array."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise RunStoreError(f"{path}: shorter than the {_HEADER.size}-byte header")
    magic, n_qubits, nev, complex_flag = _HEADER.unpack_from(raw)
    if magic != EIGVEC_MAGIC:
        raise RunStoreError(f"{path}: bad magic {magic!r}")
    dim = 1 << n_qubits
    expected = _HEADER.size + nev * dim * (16 if complex_flag else 8)
    if len(raw) != expected:
        raise RunStoreError(
            f"{path}: size mismatch, expected {expected} bytes for "
            f"n_qubits={n_qubits} nev={nev} complex={complex_flag}, "
            f"got {len(raw)}"
        )
    dtype = "<c16" if complex_flag else "<f8"
    flat = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    return flat.reshape(nev, dim).T.copy()


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def write_run(sweep: SpectralSweep, dest: str | Path,
              tracked: TrackedBranches | None = None,
              gap_series: GapSeries | None = None,
              adiabatic: AdiabaticSeries | None = None,
              minima: list[MinGapSummary] | None = None,
              ensemble: EnsembleSummary | None = None,
              instance: dict | None = None,
              overwrite: bool = False) -> Path:
    """Persist a sweep (and any finished extras) to a run directory.

    Optional components are simply absent from the directory when not
    given.  Eigenvectors are stored only when the sweep was configured with
    ``save_eigenvectors`` (tracking keeps them in memory without implying
    persistence).  ``instance`` is an optional free-form dict tying the run
    to a generated problem (family, seed, ...).  Returns the run path.
    """
    dest = Path(dest)
    if dest.exists():
        if not overwrite:
            raise RunExistsError(
                f"{dest} already exists (pass overwrite to replace it)")
        shutil.rmtree(dest)
    dest.mkdir(parents=True)

    config = sweep.config
    prov = sweep.provenance
    (dest / "hi.txt").write_text(prov["hi_text"], encoding="ascii")
    (dest / "hp.txt").write_text(prov["hp_text"], encoding="ascii")

    meta = {
        "format_version": FORMAT_VERSION,
        "tool": TOOL_NAME,
        "tool_version": TOOL_VERSION,
        "n_qubits": sweep.n_qubits,
        "config": asdict(config),
        "schedule": {"kind": prov["schedule_kind"],
                     "table": prov["schedule_table"]},
        "hi_sha256": prov["hi_sha256"],
        "hp_sha256": prov["hp_sha256"],
        "hi_offset": prov["hi_offset"],
        "hp_offset": prov["hp_offset"],
        "solver_seed": prov["solver_seed"],
        "created_utc": prov["created_utc"],
        "degenerate_steps": [t for t, snap in enumerate(sweep.snapshots)
                             if snap.degenerate],
    }
    if instance:
        meta["instance"] = dict(instance)
    if tracked is not None:
        meta["tracking"] = {
            "lost_threshold": tracked.lost_threshold,
            "lost_at": [int(t) for t in tracked.lost_at],
        }
    (dest / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="ascii")

    k = config.nev
    _write_csv(
        dest / "spectrum.csv",
        ["s"] + [f"E{i}" for i in range(k)],
        ([_fmt(snap.s)] + [_fmt(e) for e in snap.energies]
         for snap in sweep.snapshots),
    )
    _write_csv(
        dest / "residuals.csv",
        ["s"] + [f"r{i}" for i in range(k)],
        ([_fmt(snap.s)] + [_fmt(r) for r in snap.residual_norms]
         for snap in sweep.snapshots),
    )

    if config.save_eigenvectors and sweep.has_eigenvectors():
        vec_dir = dest / "eigvecs"
        vec_dir.mkdir()
        for t, snap in enumerate(sweep.snapshots):
            write_eigvec_file(vec_dir / f"step_{t:04d}.bin",
                              snap.eigenvectors, sweep.n_qubits)

    if all(snap.z_expect is not None for snap in sweep.snapshots):
        def z_rows():
            for snap in sweep.snapshots:
                for state in range(k):
                    for q in range(sweep.n_qubits):
                        yield [_fmt(snap.s), str(state), str(q),
                               _fmt(snap.z_expect[state, q])]
        _write_csv(dest / "observables.csv",
                   ["s", "state", "qubit", "z"], z_rows())

    if all(snap.zz_corr is not None for snap in sweep.snapshots):
        def zz_rows():
            for snap in sweep.snapshots:
                for state in range(k):
                    for i in range(sweep.n_qubits):
                        for j in range(i, sweep.n_qubits):
                            yield [_fmt(snap.s), str(state), str(i), str(j),
                                   _fmt(snap.zz_corr[state, i, j])]
        _write_csv(dest / "zz.csv",
                   ["s", "state", "i", "j", "zz"], zz_rows())

    if tracked is not None:
        write_tracking_csv(dest, tracked)
    write_derived_tables(dest, gap_series=gap_series, adiabatic=adiabatic,
                         minima=minima, ensemble=ensemble)

    (dest / COMPLETE_MARKER).write_text("", encoding="ascii")
    return dest


def write_tracking_csv(run_dir: Path, tracked: TrackedBranches) -> None:
    steps, k = tracked.permutations.shape

    def rows():
        for t in range(steps):
            for i in range(k):
                yield [str(t), str(i), str(int(tracked.permutations[t, i])),
                       _fmt(tracked.overlaps[t, i])]
    _write_csv(Path(run_dir) / "tracking.csv",
               ["step", "sorted_idx", "branch_id", "overlap"], rows())


def write_derived_tables(run_dir: str | Path,
                         gap_series: GapSeries | None = None,
                         adiabatic: AdiabaticSeries | None = None,
                         minima: list[MinGapSummary] | None = None,
                         ensemble: EnsembleSummary | None = None) -> None:
    """Write whichever derived CSVs are available into a run directory.

    Called by :func:`write_run` and by post-processing on existing runs.
    ``derived.csv`` carries the gap columns always and the |M_10|/R columns
    only when an adiabatic series is supplied alongside.
    """
    run_dir = Path(run_dir)
    if gap_series is not None:
        header = ["s"] + [f"Delta_{i}0" for i in range(1, gap_series.n_levels)]
        if adiabatic is not None:
            header += ["absM_10", "R", "flag_near_singular"]

        def derived_rows():
            for t, s in enumerate(gap_series.s_grid):
                row = [_fmt(s)] + [_fmt(d) for d in gap_series.from_ground[t]]
                if adiabatic is not None:
                    row += [_fmt(adiabatic.abs_m10[t]),
                            _fmt(adiabatic.ratio[t]),
                            str(int(adiabatic.flagged[t]))]
                yield row
        _write_csv(run_dir / "derived.csv", header, derived_rows())

    if minima:
        _write_csv(
            run_dir / "minima.csv",
            ["instance", "n", "seed", "dmin_raw", "dmin_refined", "s_star"],
            ([m.instance, str(m.n_qubits), str(m.seed), _fmt(m.dmin_raw),
              _fmt(m.dmin), _fmt(m.s_star)] for m in minima),
        )

    if ensemble is not None:
        def ensemble_rows():
            for n in ensemble.sizes:
                st = ensemble.by_size[n]
                yield [str(n), str(st.count), _fmt(st.dmin_min),
                       _fmt(st.dmin_median), _fmt(st.dmin_mean),
                       _fmt(st.dmin_max), _fmt(st.sstar_median),
                       st.hardest.instance, st.typical.instance,
                       st.easiest.instance]
        _write_csv(
            run_dir / "ensemble.csv",
            ["n", "count", "dmin_min", "dmin_median", "dmin_mean",
             "dmin_max", "sstar_median", "hardest", "typical", "easiest"],
            ensemble_rows(),
        )


# ---------------------------------------------------------------------------
# reading
# ---------------------------------------------------------------------------

@dataclass
class LoadedRun:
    """A run directory pulled back into memory.

    ``sweep`` and ``tracked`` are reconstructed objects; the derived tables
    are kept as (header, rows) string tables since their consumers are
    exporters and plotting, not further numerics.
    """

    path: Path
    meta: dict
    sweep: SpectralSweep
    tracked: TrackedBranches | None
    tables: dict[str, tuple[list[str], list[list[str]]]]

    def has_series(self, name: str) -> bool:
        if name == "eigvecs":
            return self.sweep.has_eigenvectors()
        if name == "tracking":
            return self.tracked is not None
        return name in self.tables


def read_run(path: str | Path) -> LoadedRun:
    """Load and validate a completed run directory.

    Fails on a missing completion marker, an incompatible major format
    version, input files whose digests disagree with the metadata, or
    malformed eigenvector files.
    """
    path = Path(path)
    if not (path / COMPLETE_MARKER).exists():
        raise IncompleteRunError(f"{path} has no {COMPLETE_MARKER} marker")
    meta = json.loads((path / "meta.json").read_text(encoding="ascii"))

    version = str(meta.get("format_version", ""))
    major = version.split(".", 1)[0]
    if major != FORMAT_VERSION.split(".", 1)[0]:
        raise FormatVersionError(
            f"{path}: format version {version!r} is incompatible with "
            f"{FORMAT_VERSION} (major versions must match)")

    for name, key in (("hi.txt", "hi_sha256"), ("hp.txt", "hp_sha256")):
        digest = hashlib.sha256((path / name).read_bytes()).hexdigest()
        if digest != meta[key]:
            raise DigestMismatchError(
                f"{path / name}: sha256 {digest} does not match "
                f"recorded {meta[key]}")

    config = SweepConfig(**meta["config"])
    k = config.nev
    header, rows = _read_csv(path / "spectrum.csv")
    if len(header) != k + 1 or len(rows) != config.s_steps:
        raise RunStoreError(
            f"{path}/spectrum.csv: expected {config.s_steps} rows x "
            f"{k + 1} columns, found {len(rows)} x {len(header)}")
    _, resid_rows = _read_csv(path / "residuals.csv")

    degenerate_steps = set(meta.get("degenerate_steps", []))
    snapshots = []
    for t, row in enumerate(rows):
        snapshots.append(SpectralSnapshot(
            s=float(row[0]),
            energies=np.array([float(x) for x in row[1:]]),
            residual_norms=np.array([float(x) for x in resid_rows[t][1:]]),
            degenerate=t in degenerate_steps,
        ))

    vec_dir = path / "eigvecs"
    if vec_dir.is_dir():
        for t, snap in enumerate(snapshots):
            vectors = read_eigvec_file(vec_dir / f"step_{t:04d}.bin")
            if vectors.shape != (1 << meta["n_qubits"], k):
                raise RunStoreError(
                    f"{vec_dir}/step_{t:04d}.bin: shape {vectors.shape} "
                    f"does not match the run configuration")
            snap.eigenvectors = vectors

    if (path / "observables.csv").exists():
        _, obs_rows = _read_csv(path / "observables.csv")
        n = meta["n_qubits"]
        for snap in snapshots:
            snap.z_expect = np.zeros((k, n))
        for row in obs_rows:
            t = _grid_index(snapshots, float(row[0]))
            snapshots[t].z_expect[int(row[1]), int(row[2])] = float(row[3])

    if (path / "zz.csv").exists():
        _, zz_rows = _read_csv(path / "zz.csv")
        n = meta["n_qubits"]
        for snap in snapshots:
            snap.zz_corr = np.zeros((k, n, n))
        for row in zz_rows:
            t = _grid_index(snapshots, float(row[0]))
            state, i, j = int(row[1]), int(row[2]), int(row[3])
            value = float(row[4])
            snapshots[t].zz_corr[state, i, j] = value
            snapshots[t].zz_corr[state, j, i] = value

    sweep = SpectralSweep(
        config=config, n_qubits=meta["n_qubits"], snapshots=snapshots,
        provenance={
            "hi_text": (path / "hi.txt").read_text(encoding="ascii"),
            "hp_text": (path / "hp.txt").read_text(encoding="ascii"),
            "hi_sha256": meta["hi_sha256"],
            "hp_sha256": meta["hp_sha256"],
            "hi_offset": meta["hi_offset"],
            "hp_offset": meta["hp_offset"],
            "schedule_kind": meta["schedule"]["kind"],
            "schedule_table": meta["schedule"]["table"],
            "solver_seed": meta["solver_seed"],
            "created_utc": meta["created_utc"],
        },
    )

    tracked = None
    if (path / "tracking.csv").exists():
        _, track_rows = _read_csv(path / "tracking.csv")
        steps = config.s_steps
        permutations = np.zeros((steps, k), dtype=np.int64)
        overlaps = np.zeros((steps, k))
        for row in track_rows:
            t, i = int(row[0]), int(row[1])
            permutations[t, i] = int(row[2])
            overlaps[t, i] = float(row[3])
        info = meta.get("tracking", {})
        tracked = TrackedBranches(
            permutations=permutations, overlaps=overlaps,
            lost_at=np.array(info.get("lost_at", [-1] * k), dtype=np.int64),
            lost_threshold=info.get("lost_threshold", 0.5),
        )

    tables = {}
    for name in ("derived", "minima", "ensemble"):
        file = path / f"{name}.csv"
        if file.exists():
            tables[name] = _read_csv(file)

    return LoadedRun(path=path, meta=meta, sweep=sweep, tracked=tracked,
                     tables=tables)


def _grid_index(snapshots: list[SpectralSnapshot], s: float) -> int:
    grid = np.array([snap.s for snap in snapshots])
    t = int(np.argmin(np.abs(grid - s)))
    return t


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

EXPORTABLE = ("spectrum", "residuals", "observables", "zz", "tracking",
              "derived", "minima", "ensemble")


def export_csv(run: LoadedRun, selection, dest: str | Path) -> list[Path]:
    """Copy selected series out of a run as standalone CSV files.

    ``selection`` is an iterable of series names (see ``EXPORTABLE``) or
    the string ``"auto"`` for every series the run holds.  Raises
    :class:`MissingSeriesError` on an explicit request the run cannot
    satisfy.  Returns the written paths.
    """
    if selection == "auto":
        names = [n for n in EXPORTABLE if (run.path / f"{n}.csv").exists()]
    else:
        names = list(selection)
        for name in names:
            if name not in EXPORTABLE:
                raise MissingSeriesError(
                    f"unknown series {name!r}; available: {EXPORTABLE}")
            if not (run.path / f"{name}.csv").exists():
                raise MissingSeriesError(
                    f"run {run.path} does not hold series {name!r}")
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        target = dest / f"{name}.csv"
        shutil.copyfile(run.path / f"{name}.csv", target)
        written.append(target)
    return written
