"""Figure rendering from exported CSV series.

This layer maps CSV cells to pixels and nothing else: every plotted value
comes straight out of a run's CSV files, all numerics live upstream.  Eight
figure families cover the standard views of a run or an ensemble:

  minigap-distrib        histogram of refined minimum gaps per size
  minigap-scatter        minimum gap versus its location, one panel per size
  energy-bands-sorted    sorted level curves E_i(s)
  energy-bands-tracked   branch-reordered level curves
  characteristic-dynamics  Delta_10, |M_10| and R on one axis
  spin-dynamics          <Z_i>(s) heatmap for one state
  spin-expectation       per-qubit <Z_i>(s) curves for one state
  spin-spin-correlation  <Z_i Z_j> matrix at one grid point

Rendering is deterministic: fixed figure sizes, fixed dpi, no randomness.
Energy-band families draw a vertical gray bar at the recorded minimum-gap
location; expectation and correlation heatmaps use a diverging color scale
centered at zero over [-1, +1]; near-singular R points (flagged in
``derived.csv``) are dropped from the characteristic-dynamics plot.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np

FAMILIES = (
    "minigap-distrib",
    "minigap-scatter",
    "energy-bands-sorted",
    "energy-bands-tracked",
    "characteristic-dynamics",
    "spin-dynamics",
    "spin-expectation",
    "spin-spin-correlation",
)

# CSV files each family consumes, by series name (<name>.csv in a run).
FAMILY_INPUTS = {
    "minigap-distrib": ("minima",),
    "minigap-scatter": ("minima",),
    "energy-bands-sorted": ("spectrum", "minima"),
    "energy-bands-tracked": ("spectrum", "tracking", "minima"),
    "characteristic-dynamics": ("derived",),
    "spin-dynamics": ("observables",),
    "spin-expectation": ("observables",),
    "spin-spin-correlation": ("zz",),
}

_RC = {
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}

# Overlap threshold reconstructing lost-branch events from tracking.csv.
LOST_THRESHOLD = 0.5


class FigureDataError(ValueError):
    """Input CSV is missing, or its columns do not match the schema."""


@dataclass
class FigureSpec:
    """One figure request: family, input CSVs, output path, options.

    Options (all optional): ``state`` (int, which eigenstate for the spin
    families, default 0), ``s_value`` (float, grid point for the
    correlation matrix, default the last), ``log`` (bool, log-scale y for
    characteristic-dynamics, default False), ``title`` (str).
    """

    family: str
    inputs: dict[str, Path]
    output: Path
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise FigureDataError(
                f"unknown figure family {self.family!r}; "
                f"choose from {', '.join(FAMILIES)}")
        missing = [n for n in FAMILY_INPUTS[self.family] if n not in self.inputs]
        if missing:
            raise FigureDataError(
                f"{self.family} needs input series {', '.join(missing)}")


def load_columns(path: str | Path) -> dict[str, list[str]]:
    """Read a CSV into a column dict of strings; header row required."""
    path = Path(path)
    if not path.exists():
        raise FigureDataError(f"missing input file {path}")
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureDataError(f"{path} is empty") from None
        columns: dict[str, list[str]] = {name: [] for name in header}
        for row in reader:
            if len(row) != len(header):
                raise FigureDataError(
                    f"{path}: row with {len(row)} fields under a "
                    f"{len(header)}-column header")
            for name, value in zip(header, row):
                columns[name].append(value)
    return columns


def _floats(columns: dict, name: str, path) -> np.ndarray:
    if name not in columns:
        raise FigureDataError(f"{path}: expected a {name!r} column, "
                              f"found {list(columns)}")
    return np.array([float(x) for x in columns[name]])


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the written image path."""
    renderer = _RENDERERS[spec.family]
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_RC):
        fig = renderer(spec)
        try:
            if spec.options.get("title"):
                fig.suptitle(spec.options["title"])
            fig.savefig(spec.output)
        finally:
            plt.close(fig)
    return spec.output


def render_run(run_dir: str | Path, out_dir: str | Path,
               families="auto", options: dict | None = None,
               image_format: str = "png") -> list[Path]:
    """Render every requested family a run directory can feed.

    ``families`` is a list of family names or ``"auto"`` to render exactly
    those whose input CSVs exist.  Explicitly requested families with
    missing inputs raise; auto mode skips them.
    """
    run_dir, out_dir = Path(run_dir), Path(out_dir)
    auto = families == "auto"
    wanted = list(FAMILIES) if auto else list(families)
    written = []
    for family in wanted:
        inputs = {name: run_dir / f"{name}.csv"
                  for name in FAMILY_INPUTS[family]}
        if auto and not all(p.exists() for p in inputs.values()):
            continue
        if family == "characteristic-dynamics" and inputs["derived"].exists():
            # gaps-only runs have a derived.csv without the R columns
            if auto and "R" not in load_columns(inputs["derived"]):
                continue
        spec = FigureSpec(
            family=family, inputs=inputs,
            output=out_dir / f"{family}.{image_format}",
            options=dict(options or {}),
        )
        written.append(render(spec))
    return written


# ---------------------------------------------------------------------------
# per-family renderers
# ---------------------------------------------------------------------------

def _minima_by_size(spec: FigureSpec):
    cols = load_columns(spec.inputs["minima"])
    path = spec.inputs["minima"]
    dmin = _floats(cols, "dmin_refined", path)
    s_star = _floats(cols, "s_star", path)
    sizes = _floats(cols, "n", path).astype(int)
    order = sorted(set(sizes.tolist()))
    return dmin, s_star, sizes, order


def _fig_minigap_distrib(spec: FigureSpec):
    dmin, _, sizes, order = _minima_by_size(spec)
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    bins = np.linspace(0.0, max(dmin.max(), 1e-12) * 1.05, 24)
    for n in order:
        ax.hist(dmin[sizes == n], bins=bins, histtype="step",
                label=f"n = {n}")
    ax.set_xlabel(r"$\Delta_{min}$")
    ax.set_ylabel("instances")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return fig


def _fig_minigap_scatter(spec: FigureSpec):
    dmin, s_star, sizes, order = _minima_by_size(spec)
    panels = max(len(order), 1)
    fig, axes = plt.subplots(1, panels, figsize=(3.0 * panels, 3.0),
                             sharey=True, squeeze=False)
    for ax, n in zip(axes[0], order):
        pick = sizes == n
        ax.scatter(s_star[pick], dmin[pick], s=12, alpha=0.8)
        ax.set_title(f"n = {n}")
        ax.set_xlabel(r"$s^{*}$")
        ax.set_xlim(0.0, 1.0)
    axes[0][0].set_ylabel(r"$\Delta_{min}$")
    fig.tight_layout()
    return fig


def _spectrum_grid(spec: FigureSpec):
    cols = load_columns(spec.inputs["spectrum"])
    path = spec.inputs["spectrum"]
    s = _floats(cols, "s", path)
    levels = [name for name in cols if name.startswith("E")]
    levels.sort(key=lambda name: int(name[1:]))
    if not levels:
        raise FigureDataError(f"{path}: no E<i> columns")
    energies = np.column_stack([_floats(cols, name, path) for name in levels])
    return s, energies


def _gap_marker(spec: FigureSpec, ax):
    cols = load_columns(spec.inputs["minima"])
    s_star = _floats(cols, "s_star", spec.inputs["minima"])
    if s_star.size:
        ax.axvline(float(s_star[0]), color="0.6", linewidth=3.0,
                   alpha=0.55, zorder=0)


def _fig_energy_bands_sorted(spec: FigureSpec):
    s, energies = _spectrum_grid(spec)
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    for i in range(energies.shape[1]):
        ax.plot(s, energies[:, i], label=rf"$E_{{{i}}}$")
    _gap_marker(spec, ax)
    ax.set_xlabel("s")
    ax.set_ylabel("energy")
    ax.legend(loc="upper right", ncol=2, fontsize=7)
    fig.tight_layout()
    return fig


def _fig_energy_bands_tracked(spec: FigureSpec):
    s, energies = _spectrum_grid(spec)
    cols = load_columns(spec.inputs["tracking"])
    path = spec.inputs["tracking"]
    step = _floats(cols, "step", path).astype(int)
    sorted_idx = _floats(cols, "sorted_idx", path).astype(int)
    branch = _floats(cols, "branch_id", path).astype(int)
    overlap = _floats(cols, "overlap", path)
    steps, k = energies.shape
    if step.max() + 1 != steps:
        raise FigureDataError(
            f"{path}: tracking covers {step.max() + 1} steps, "
            f"spectrum has {steps}")

    tracked = np.full((steps, k), np.nan)
    lost_from = np.full(k, steps, dtype=int)
    for t, i, b, ov in zip(step, sorted_idx, branch, overlap):
        tracked[t, b] = energies[t, i]
        if ov < LOST_THRESHOLD:
            lost_from[b] = min(lost_from[b], t)

    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    for b in range(k):
        curve = tracked[:, b].copy()
        # a lost branch stops being that physical state: blank it out
        # from the loss event on, which leaves a visible gap in the curve
        curve[lost_from[b]:] = np.nan
        ax.plot(s, curve, label=f"branch {b}")
        if lost_from[b] < steps:
            ax.plot(s[lost_from[b] - 1], tracked[lost_from[b] - 1, b],
                    marker="x", color="black", markersize=5)
    _gap_marker(spec, ax)
    ax.set_xlabel("s")
    ax.set_ylabel("energy")
    ax.legend(loc="upper right", ncol=2, fontsize=7)
    fig.tight_layout()
    return fig


def _fig_characteristic_dynamics(spec: FigureSpec):
    cols = load_columns(spec.inputs["derived"])
    path = spec.inputs["derived"]
    s = _floats(cols, "s", path)
    delta = _floats(cols, "Delta_10", path)
    m10 = _floats(cols, "absM_10", path)
    ratio = _floats(cols, "R", path)
    flags = _floats(cols, "flag_near_singular", path).astype(bool)

    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.plot(s, delta, label=r"$\Delta_{10}$")
    ax.plot(s, m10, label=r"$|M_{10}|$")
    keep = ~flags
    ax.plot(s[keep], ratio[keep], label="R")
    if spec.options.get("log"):
        ax.set_yscale("log")
    ax.set_xlabel("s")
    ax.legend(loc="upper left")
    fig.tight_layout()
    return fig


def _observables_state(spec: FigureSpec):
    cols = load_columns(spec.inputs["observables"])
    path = spec.inputs["observables"]
    s = _floats(cols, "s", path)
    state = _floats(cols, "state", path).astype(int)
    qubit = _floats(cols, "qubit", path).astype(int)
    z = _floats(cols, "z", path)
    want = int(spec.options.get("state", 0))
    pick = state == want
    if not pick.any():
        raise FigureDataError(f"{path}: no rows for state {want}")
    s_grid = np.unique(s[pick])
    n = qubit[pick].max() + 1
    table = np.full((n, s_grid.size), np.nan)
    pos = {float(v): t for t, v in enumerate(s_grid)}
    for sv, q, value in zip(s[pick], qubit[pick], z[pick]):
        table[q, pos[float(sv)]] = value
    return s_grid, table, want


def _fig_spin_dynamics(spec: FigureSpec):
    s_grid, table, state = _observables_state(spec)
    fig, ax = plt.subplots(figsize=(4.6, 3.0))
    mesh = ax.imshow(table, aspect="auto", origin="lower",
                     cmap="RdBu_r", vmin=-1.0, vmax=1.0,
                     extent=(s_grid[0], s_grid[-1], -0.5, table.shape[0] - 0.5))
    ax.set_xlabel("s")
    ax.set_ylabel("qubit")
    ax.set_title(rf"$\langle Z_i \rangle$, state {state}", fontsize=9)
    ax.grid(False)
    fig.colorbar(mesh, ax=ax, label=r"$\langle Z \rangle$")
    fig.tight_layout()
    return fig


def _fig_spin_expectation(spec: FigureSpec):
    s_grid, table, state = _observables_state(spec)
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    for q in range(table.shape[0]):
        ax.plot(s_grid, table[q], label=f"qubit {q}")
    ax.set_xlabel("s")
    ax.set_ylabel(rf"$\langle Z_i \rangle$, state {state}")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="best", ncol=2, fontsize=7)
    fig.tight_layout()
    return fig


def _fig_spin_spin_correlation(spec: FigureSpec):
    cols = load_columns(spec.inputs["zz"])
    path = spec.inputs["zz"]
    s = _floats(cols, "s", path)
    state = _floats(cols, "state", path).astype(int)
    qi = _floats(cols, "i", path).astype(int)
    qj = _floats(cols, "j", path).astype(int)
    zz = _floats(cols, "zz", path)

    want_state = int(spec.options.get("state", 0))
    s_target = spec.options.get("s_value")
    s_values = np.unique(s)
    s_pick = s_values[-1] if s_target is None else s_values[
        int(np.argmin(np.abs(s_values - float(s_target))))]
    pick = (state == want_state) & (s == s_pick)
    if not pick.any():
        raise FigureDataError(
            f"{path}: no rows for state {want_state} at s = {s_pick}")
    n = qj[pick].max() + 1
    matrix = np.full((n, n), np.nan)
    for a, b, value in zip(qi[pick], qj[pick], zz[pick]):
        matrix[a, b] = value
        matrix[b, a] = value

    fig, ax = plt.subplots(figsize=(3.8, 3.2))
    mesh = ax.imshow(matrix, cmap="RdBu_r", vmin=-1.0, vmax=1.0,
                     origin="lower")
    ax.set_xlabel("qubit j")
    ax.set_ylabel("qubit i")
    ax.set_title(rf"$\langle Z_i Z_j \rangle$ at s = {s_pick:g}", fontsize=9)
    ax.grid(False)
    fig.colorbar(mesh, ax=ax)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "minigap-distrib": _fig_minigap_distrib,
    "minigap-scatter": _fig_minigap_scatter,
    "energy-bands-sorted": _fig_energy_bands_sorted,
    "energy-bands-tracked": _fig_energy_bands_tracked,
    "characteristic-dynamics": _fig_characteristic_dynamics,
    "spin-dynamics": _fig_spin_dynamics,
    "spin-expectation": _fig_spin_expectation,
    "spin-spin-correlation": _fig_spin_spin_correlation,
}
