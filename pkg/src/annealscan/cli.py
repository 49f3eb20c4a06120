"""Command-line frontend: simulate, gen, post, ensemble, report.

Subcommands and their roles:

  simulate   one sweep of one instance, written to a run directory
  gen        write a generated problem instance as a term file + sidecar
  post       derived series (gaps, minima, dynamics) on an existing run
  ensemble   generate/simulate/summarise many instances in parallel
  report     render figures from a run's CSV series

The simulate flags use single-dash long names (``-N``, ``-nev``,
``-HP_file``, ...); exactly one of ``-HI_file`` / ``-auto_generate_hi``
must be given and ``-HP_file`` is required.  Exit codes are stable: 0 on
success, 2 for usage errors, 3 for input files that fail to parse, 4 for
solver non-convergence, and 1 for partial ensemble failures (details land
in ``failures.json``, the batch itself keeps going).

Environment overrides: ``ANNEALSCAN_THREADS`` supplies the default thread
count when ``-threads`` is absent; relative output paths resolve under
``ANNEALSCAN_OUT_ROOT`` when it is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from .eigensolve import DEFAULT_SOLVER_SEED, EigensolverError
from .hamiltonian import (HamiltonianSpec, LINEAR_SCHEDULE, Schedule,
                          TermFormatError, make_driver, parse_hamiltonian,
                          parse_schedule, serialize_hamiltonian)
from .problems import GeneratorParams, gen_mqo
from .derived import (MinGapSummary, adiabatic_ratio, ensemble_summary, gaps,
                      matrix_elements, min_gap)
from .runstore import (IncompleteRunError, RunStoreError, _read_csv, read_run,
                       write_run, write_derived_tables, COMPLETE_MARKER)
from .sweep import SweepConfig, sweep, track_branches

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_SOLVER = 4


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except TermFormatError as exc:
        print(f"annealscan: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except EigensolverError as exc:
        print(f"annealscan: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (RunStoreError, OSError, ValueError) as exc:
        print(f"annealscan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


# ---------------------------------------------------------------------------
# parser construction
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annealscan", allow_abbrev=False,
        description="Spectral analysis of quantum annealing Hamiltonians.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", allow_abbrev=False,
                         help="sweep one instance and persist the run")
    sim.add_argument("-N", type=int, required=True,
                     help="number of qubits; validated against term files")
    sim.add_argument("-nev", type=int, default=8,
                     help="number of lowest eigenpairs (default 8)")
    sim.add_argument("-s_start", type=float, default=0.0)
    sim.add_argument("-s_end", type=float, default=1.0)
    sim.add_argument("-s_steps", type=int, default=200)
    sim.add_argument("-HI_file", type=Path,
                     help="driver Hamiltonian term file")
    sim.add_argument("-auto_generate_hi", action="store_true",
                     help="use the uniform transverse-field driver")
    sim.add_argument("-hi_gamma", type=float, default=1.0,
                     help="transverse-field strength for the generated driver")
    sim.add_argument("-HP_file", type=Path,
                     help="problem Hamiltonian term file (required)")
    sim.add_argument("-hp_offset", type=float, default=0.0,
                     help="constant energy offset added to the problem")
    sim.add_argument("-track_by_overlap", action="store_true")
    sim.add_argument("-track_observables", action="store_true")
    sim.add_argument("-track_zz_correlations", action="store_true")
    sim.add_argument("-save_eigenvectors", action="store_true")
    sim.add_argument("-tolerance", type=float, default=1e-9,
                     help="eigensolver residual tolerance")
    sim.add_argument("-schedule_file", type=Path,
                     help="tabulated schedule (s A B per line); default linear")
    sim.add_argument("-seed", type=int, default=DEFAULT_SOLVER_SEED,
                     help="eigensolver start-vector seed")
    sim.add_argument("-threads", type=int, default=None,
                     help="BLAS thread cap for this run")
    sim.add_argument("-out", type=Path, required=True,
                     help="run directory to create")
    sim.add_argument("-overwrite", action="store_true",
                     help="replace an existing run directory")
    sim.set_defaults(handler=run_simulate)

    gen = sub.add_parser("gen", allow_abbrev=False,
                         help="generate a problem instance term file")
    gen.add_argument("family", choices=("fim", "sk", "hw", "mqo"))
    gen.add_argument("-N", type=int, default=0, help="number of spins")
    gen.add_argument("-seed", "--seed", type=int, default=0)
    gen.add_argument("-coupling", type=float, default=1.0,
                     help="fim: uniform coupling strength")
    gen.add_argument("-fld", type=float, default=0.0,
                     help="fim: uniform longitudinal field")
    gen.add_argument("-dist", choices=("gaussian", "uniform"),
                     default="gaussian", help="sk: coupling distribution")
    gen.add_argument("-field_scale", type=float, default=1.0,
                     help="sk: random field scale")
    gen.add_argument("-pin", action="store_true",
                     help="sk: pin spin 0 by a dominant field")
    gen.add_argument("--queries", type=int, default=0, help="mqo: query count")
    gen.add_argument("--plans", type=int, default=0,
                     help="mqo: plans per query")
    gen.add_argument("--density", type=float, default=0.0,
                     help="mqo: inter-query savings density")
    gen.add_argument("-out", type=Path, default=None,
                     help="term file path (default derived from parameters)")
    gen.add_argument("-overwrite", action="store_true")
    gen.set_defaults(handler=run_gen)

    post = sub.add_parser("post", allow_abbrev=False,
                          help="compute derived series on an existing run")
    post.add_argument("-run", type=Path, required=True)
    post.add_argument("-series", default="auto",
                      help="comma list from {gaps,minima,dynamics} or 'auto'")
    post.set_defaults(handler=run_post)

    ens = sub.add_parser("ensemble", allow_abbrev=False,
                         help="simulate an instance ensemble and aggregate")
    ens.add_argument("-family", choices=("fim", "sk", "hw", "mqo"),
                     default="sk")
    ens.add_argument("-sizes", required=True,
                     help="comma list of qubit counts, e.g. 6,8,10")
    ens.add_argument("-count", type=int, required=True,
                     help="instances per size")
    ens.add_argument("-seed", type=int, default=1,
                     help="base seed; instance i uses seed base+i")
    ens.add_argument("-dist", choices=("gaussian", "uniform"),
                     default="gaussian")
    ens.add_argument("-field_scale", type=float, default=1.0)
    ens.add_argument("-pin", action="store_true")
    ens.add_argument("-nev", type=int, default=8)
    ens.add_argument("-s_steps", type=int, default=200)
    ens.add_argument("-tolerance", type=float, default=1e-9)
    ens.add_argument("-hi_gamma", type=float, default=1.0)
    ens.add_argument("-threads", type=int, default=None,
                     help="worker pool size (default ANNEALSCAN_THREADS or 1)")
    ens.add_argument("-out", type=Path, required=True,
                     help="ensemble root directory")
    ens.set_defaults(handler=run_ensemble)

    rep = sub.add_parser("report", allow_abbrev=False,
                         help="render figures from a run's CSV series")
    rep.add_argument("-run", type=Path, required=True)
    rep.add_argument("-out", type=Path, default=None,
                     help="image directory (default <run>/figs)")
    rep.add_argument("-families", default="auto",
                     help="comma list of figure families or 'auto'")
    rep.add_argument("-format", choices=("png", "svg"), default="png")
    rep.add_argument("-state", type=int, default=0,
                     help="eigenstate index for the spin families")
    rep.add_argument("-log", action="store_true",
                     help="log y-axis for characteristic-dynamics")
    rep.set_defaults(handler=run_report)

    return parser


def _resolve_out(path: Path) -> Path:
    root = os.environ.get("ANNEALSCAN_OUT_ROOT")
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _thread_count(requested: int | None) -> int | None:
    if requested is not None:
        return requested
    env = os.environ.get("ANNEALSCAN_THREADS")
    return int(env) if env else None


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _load_problem(args) -> tuple[HamiltonianSpec, HamiltonianSpec, Schedule]:
    if args.auto_generate_hi == (args.HI_file is not None):
        raise ValueError(
            "exactly one of -HI_file and -auto_generate_hi is required")
    if args.HP_file is None:
        raise ValueError("-HP_file is required")
    if args.N < 1:
        raise ValueError("-N must be at least 1")

    if args.auto_generate_hi:
        hi = make_driver(args.N, args.hi_gamma)
    else:
        hi = parse_hamiltonian(args.HI_file.read_text(encoding="ascii"), args.N)
    hp = parse_hamiltonian(args.HP_file.read_text(encoding="ascii"), args.N)
    if args.hp_offset:
        hp = HamiltonianSpec(hp.n_qubits, hp.terms,
                             constant_offset=hp.constant_offset + args.hp_offset)
    schedule = LINEAR_SCHEDULE
    if args.schedule_file is not None:
        schedule = parse_schedule(args.schedule_file.read_text(encoding="ascii"))
    return hi, hp, schedule


def run_simulate(args) -> int:
    hi, hp, schedule = _load_problem(args)
    config = SweepConfig(
        s_start=args.s_start, s_end=args.s_end, s_steps=args.s_steps,
        nev=args.nev, tolerance=args.tolerance,
        save_eigenvectors=args.save_eigenvectors,
        track_by_overlap=args.track_by_overlap,
        track_observables=args.track_observables,
        track_zz=args.track_zz_correlations,
        solver_seed=args.seed,
    )
    result = _run_sweep(hi, hp, schedule, config, _thread_count(args.threads))
    tracked = track_branches(result) if args.track_by_overlap else None
    out = _resolve_out(args.out)
    write_run(result, out, tracked=tracked, overwrite=args.overwrite)
    print(f"wrote run to {out}")
    return EXIT_OK


def _run_sweep(hi, hp, schedule, config, threads):
    if threads:
        try:
            from threadpoolctl import threadpool_limits
        except ImportError:
            return sweep(hi, hp, schedule, config)
        with threadpool_limits(limits=threads):
            return sweep(hi, hp, schedule, config)
    return sweep(hi, hp, schedule, config)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def run_gen(args) -> int:
    params = _generator_params(args)
    spec = params.build()

    out = args.out
    if out is None:
        if params.family == "mqo":
            out = Path(f"mqo-q{params.queries}-p{params.plans}"
                       f"-seed{params.seed}.txt")
        elif params.family == "hw":
            out = Path(f"hw-n{params.n}.txt")
        else:
            out = Path(f"{params.family}-n{params.n}-seed{params.seed}.txt")
    out = _resolve_out(out)
    if out.exists() and not args.overwrite:
        raise ValueError(f"{out} already exists (pass -overwrite to replace)")
    out.parent.mkdir(parents=True, exist_ok=True)

    out.write_text(serialize_hamiltonian(spec), encoding="ascii")
    sidecar = {
        "generator": params.metadata(),
        "n_qubits": spec.n_qubits,
        "n_terms": len(spec.terms),
        "constant_offset": spec.constant_offset,
    }
    if params.family == "mqo":
        instance = gen_mqo(params.queries, params.plans, params.density,
                           params.seed)
        sidecar["mqo"] = {
            "plans": [list(block) for block in instance.plans],
            "costs": list(instance.costs),
            "savings": [[i, j, v] for (i, j), v in
                        sorted(instance.savings.items())],
            "penalty": 1.0 + sum(instance.costs)
                       + sum(instance.savings.values()),
        }
    Path(f"{out}.meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="ascii")
    print(f"wrote {out}")
    return EXIT_OK


def _generator_params(args) -> GeneratorParams:
    family = args.family
    if family == "mqo":
        if args.queries < 1 or args.plans < 1:
            raise ValueError("mqo needs --queries and --plans")
        return GeneratorParams(family="mqo", seed=args.seed,
                               queries=args.queries, plans=args.plans,
                               density=args.density)
    if args.N < 1:
        raise ValueError(f"{family} needs -N")
    if family == "fim":
        return GeneratorParams(family="fim", n=args.N,
                               coupling=args.coupling, fld=args.fld)
    if family == "sk":
        return GeneratorParams(family="sk", n=args.N, seed=args.seed,
                               dist=args.dist, field_scale=args.field_scale,
                               pin=args.pin)
    return GeneratorParams(family="hw", n=args.N)


# ---------------------------------------------------------------------------
# post
# ---------------------------------------------------------------------------

POST_SERIES = ("gaps", "minima", "dynamics")


def run_post(args) -> int:
    run = read_run(_resolve_out(args.run))
    if args.series == "auto":
        wanted = ["gaps", "minima"]
        if run.sweep.has_eigenvectors():
            wanted.append("dynamics")
    else:
        wanted = [name.strip() for name in args.series.split(",") if name.strip()]
        for name in wanted:
            if name not in POST_SERIES:
                raise ValueError(
                    f"unknown series {name!r}; choose from {POST_SERIES}")

    gap_series = gaps(run.sweep)
    adiabatic = None
    if "dynamics" in wanted:
        if not run.sweep.has_eigenvectors():
            raise ValueError(
                "dynamics needs matrix elements, which need stored "
                "eigenvectors; this run was written without "
                "-save_eigenvectors")
        prov = run.sweep.provenance
        hi = parse_hamiltonian(prov["hi_text"], run.sweep.n_qubits)
        hp = parse_hamiltonian(prov["hp_text"], run.sweep.n_qubits)
        if prov.get("hp_offset"):
            hp = HamiltonianSpec(hp.n_qubits, hp.terms,
                                 constant_offset=prov["hp_offset"])
        if prov.get("hi_offset"):
            hi = HamiltonianSpec(hi.n_qubits, hi.terms,
                                 constant_offset=prov["hi_offset"])
        schedule = (LINEAR_SCHEDULE if prov["schedule_kind"] == "linear"
                    else Schedule("tabulated",
                                  tuple(tuple(r) for r in prov["schedule_table"])))
        elements = matrix_elements(run.sweep, hi, hp, schedule)
        adiabatic = adiabatic_ratio(elements, gap_series)

    minima = None
    if "minima" in wanted:
        info = run.meta.get("instance", {})
        minima = [min_gap(gap_series,
                          instance=info.get("name", run.path.name),
                          n_qubits=run.sweep.n_qubits,
                          seed=info.get("seed", -1))]

    write_derived_tables(
        run.path,
        gap_series=gap_series if ("gaps" in wanted or adiabatic) else None,
        adiabatic=adiabatic,
        minima=minima,
    )
    print(f"updated {run.path}: {', '.join(wanted)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _EnsembleJob:
    params: GeneratorParams
    run_dir: str
    nev: int
    s_steps: int
    tolerance: float
    hi_gamma: float


def _instance_name(params: GeneratorParams) -> str:
    return f"{params.family}-n{params.n}-seed{params.seed}"


def _run_ensemble_job(job: _EnsembleJob) -> str:
    """Simulate one instance into its run directory (worker process)."""
    run_dir = Path(job.run_dir)
    hp = job.params.build()
    hi = make_driver(hp.n_qubits, job.hi_gamma)
    config = SweepConfig(nev=job.nev, s_steps=job.s_steps,
                         tolerance=job.tolerance)
    result = sweep(hi, hp, config=config)
    series = gaps(result)
    summary = min_gap(series, instance=_instance_name(job.params),
                      n_qubits=hp.n_qubits, seed=job.params.seed)
    write_run(result, run_dir, gap_series=series, minima=[summary],
              instance={"name": _instance_name(job.params),
                        "seed": job.params.seed,
                        **job.params.metadata()},
              overwrite=True)
    return _instance_name(job.params)


def run_ensemble(args) -> int:
    sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]
    if not sizes or args.count < 1:
        raise ValueError("need at least one size and -count >= 1")
    out = _resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)

    jobs, skipped = [], 0
    for n in sizes:
        for i in range(args.count):
            params = _make_ensemble_params(args, n, args.seed + i)
            run_dir = out / _instance_name(params)
            if (run_dir / COMPLETE_MARKER).exists():
                skipped += 1
                continue
            jobs.append(_EnsembleJob(
                params=params, run_dir=str(run_dir), nev=args.nev,
                s_steps=args.s_steps, tolerance=args.tolerance,
                hi_gamma=args.hi_gamma))

    workers = _thread_count(args.threads) or 1
    failures: dict[str, str] = {}
    done = 0
    if jobs:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            futures = {pool.submit(_run_ensemble_job, job): job for job in jobs}
            for future in as_completed(futures):
                job = futures[future]
                name = _instance_name(job.params)
                try:
                    future.result()
                    done += 1
                except Exception as exc:  # per-instance isolation
                    failures[name] = f"{type(exc).__name__}: {exc}"
    if failures:
        (out / "failures.json").write_text(
            json.dumps(failures, indent=2, sort_keys=True) + "\n",
            encoding="ascii")

    summaries = _collect_minima(out, sizes, args)
    if summaries:
        write_derived_tables(out, minima=summaries,
                             ensemble=ensemble_summary(summaries))
    print(f"ensemble {out}: {done} computed, {skipped} reused, "
          f"{len(failures)} failed")
    return EXIT_PARTIAL if failures else EXIT_OK


def _make_ensemble_params(args, n: int, seed: int) -> GeneratorParams:
    # deterministic families keep the seed too: it names the run directory
    # and keeps per-instance bookkeeping (resume, failure manifest) distinct
    if args.family == "sk":
        return GeneratorParams(family="sk", n=n, seed=seed, dist=args.dist,
                               field_scale=args.field_scale, pin=args.pin)
    if args.family == "fim":
        return GeneratorParams(family="fim", n=n, seed=seed,
                               fld=args.field_scale)
    if args.family == "hw":
        return GeneratorParams(family="hw", n=n, seed=seed)
    raise ValueError("ensemble supports families fim, sk, hw")


def _collect_minima(out: Path, sizes, args):
    summaries = []
    for n in sizes:
        for i in range(args.count):
            name = f"{args.family}-n{n}-seed{args.seed + i}"
            run_dir = out / name
            if not (run_dir / "minima.csv").exists():
                continue
            _, rows = _read_csv(run_dir / "minima.csv")
            for row in rows:
                summaries.append(_minima_row_to_summary(row))
    return summaries


def _minima_row_to_summary(row):
    return MinGapSummary(
        instance=row[0], n_qubits=int(row[1]), seed=int(row[2]),
        dmin_raw=float(row[3]), dmin=float(row[4]), s_star=float(row[5]),
        s_star_raw=float(row[5]),
    )


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def run_report(args) -> int:
    from .figs import FAMILIES, render_run
    run_dir = _resolve_out(args.run)
    if not (run_dir / COMPLETE_MARKER).exists() \
            and not (run_dir / "minima.csv").exists():
        raise IncompleteRunError(
            f"{run_dir} is neither a completed run nor an ensemble root")
    families = "auto"
    if args.families != "auto":
        families = [name.strip() for name in args.families.split(",")
                    if name.strip()]
        for name in families:
            if name not in FAMILIES:
                raise ValueError(f"unknown figure family {name!r}")
    out = args.out if args.out is not None else run_dir / "figs"
    options = {"state": args.state, "log": args.log}
    written = render_run(run_dir, out, families=families, options=options,
                         image_format=args.format)
    for path in written:
        print(f"wrote {path}")
    if not written:
        print("no renderable series found", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
