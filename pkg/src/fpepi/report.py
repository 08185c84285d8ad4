"""Run artifacts: strict CSV files and matplotlib figures beside them.

All CSVs are plain RFC-style tables: one header row, comma separator, ``.``
decimal point, LF line endings, numbers printed with 10 significant digits.
Every figure writer renders to a file (Agg backend); nothing opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import ControlTrajectory, GridSpec
from .sqh import SqhTrace

__all__ = [
    "fmt",
    "density_snapshot_name",
    "write_table",
    "write_controls_csv",
    "write_trace_csv",
    "write_dynamics_csv",
    "write_field_snapshot_csv",
    "write_mc_snapshot_csv",
    "write_summary",
    "plot_controls",
    "plot_dynamics",
    "plot_density_snapshot",
    "plot_objective_history",
]


def fmt(x) -> str:
    """Number formatting used across all artifacts: 10 significant digits."""
    return f"{float(x):.10g}"


def write_table(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def density_snapshot_name(t: float, value_label: str = "f") -> str:
    base = "density" if value_label == "f" else "adjoint"
    return f"{base}_t{t:.4}.csv"


def write_controls_csv(path, u: ControlTrajectory) -> None:
    times = u.grid.times()
    rows = ((times[k], u.values[k, 0], u.values[k, 1], u.values[k, 2])
            for k in range(u.grid.nt))
    write_table(path, ["t", "alpha", "v", "eta"], rows)


def write_trace_csv(path, trace: SqhTrace) -> None:
    rows = ((it.iteration, it.J, it.tau, it.eps, int(it.accepted), it.retries)
            for it in trace.iterations)
    write_table(path, ["iter", "J", "tau", "eps", "accepted", "retries"], rows)


def write_dynamics_csv(path, times: np.ndarray, sir: np.ndarray) -> None:
    rows = ((times[k], sir[k, 0], sir[k, 1], sir[k, 2]) for k in range(len(times)))
    write_table(path, ["t", "S", "I", "R"], rows)


def write_field_snapshot_csv(path, field_slice: np.ndarray, grid: GridSpec,
                             value_label: str = "f") -> None:
    """Row-major nodal dump of one 2D field slice with x1,x2 coordinates."""
    ax = grid.axis()
    rows = ((ax[i], ax[j], field_slice[i, j])
            for i in range(grid.nx) for j in range(grid.nx))
    write_table(path, ["x1", "x2", value_label], rows)


def write_mc_snapshot_csv(path, points: np.ndarray) -> None:
    rows = ((k, points[k, 0], points[k, 1]) for k in range(points.shape[0]))
    write_table(path, ["path_id", "x1", "x2"], rows)


def write_summary(path, lines: dict[str, object]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in lines.items():
            text = fmt(value) if isinstance(value, (int, float, np.floating)) else str(value)
            fh.write(f"{key} = {text}\n")


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_controls(path, u: ControlTrajectory, bounds=None) -> None:
    times = u.grid.times()
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [r"$\alpha$ (NPI strength)", r"$v$ (vaccination)", r"$\eta$ (treatment)"]
    for i, label in enumerate(labels):
        ax.step(times, u.values[:, i], where="post", label=label)
    if bounds is not None:
        for i, bound in enumerate(bounds):
            if bound > 0:
                ax.axhline(bound, color=f"C{i}", linestyle=":", linewidth=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("control value")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.4)
    _save(fig, path)


def plot_dynamics(path, times: np.ndarray, sir: np.ndarray,
                  s_threshold: float | None = None,
                  i_threshold: float | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(times, sir[:, 0], label="S")
    ax.plot(times, sir[:, 1], label="I")
    ax.plot(times, sir[:, 2], label="R")
    if s_threshold is not None:
        ax.axhline(s_threshold, color="green", linestyle=":", linewidth=1.0)
    if i_threshold is not None:
        ax.axhline(i_threshold, color="grey", linestyle=":", linewidth=1.0)
    ax.set_xlabel("time")
    ax.set_ylabel("population fraction")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.4)
    _save(fig, path)


def plot_density_snapshot(path, field_slice: np.ndarray, grid: GridSpec,
                          t: float, s_threshold: float | None = None,
                          i_threshold: float | None = None) -> None:
    x1, x2 = grid.mesh()
    fig, ax = plt.subplots(figsize=(5, 4))
    filled = ax.contourf(x1, x2, field_slice, levels=30, cmap="RdBu_r")
    fig.colorbar(filled, ax=ax)
    if s_threshold is not None:
        ax.axvline(s_threshold, color="green", linestyle=":", linewidth=1.0)
    if i_threshold is not None:
        ax.axhline(i_threshold, color="grey", linestyle=":", linewidth=1.0)
    ax.set_xlabel("S")
    ax.set_ylabel("I")
    ax.set_title(f"t = {t:g}")
    _save(fig, path)


def plot_objective_history(path, trace: SqhTrace) -> None:
    accepted = trace.accepted()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([it.iteration for it in accepted], [it.J for it in accepted],
            marker="o", markersize=3)
    ax.set_xlabel("accepted iteration")
    ax.set_ylabel("objective J")
    ax.grid(True, alpha=0.4)
    _save(fig, path)
