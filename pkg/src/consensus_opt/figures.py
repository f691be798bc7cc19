"""Figure rendering for the report path.

Simulation and optimization commands that emit CSV also render the matching
plots (agent states, distance functionals, switching functions, control
staircase) as PNG files alongside the delimited output.  Rendering uses the
Agg backend so it works headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .optimal_control import OptimizationReport  # noqa: E402

_DPI = 150


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_simulation_figures(times, states, v, diam, w_reduced, stem: str) -> list:
    """States plot and distance-functional plot next to the CSV stem."""
    written = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i in range(states.shape[1]):
        ax.plot(times, states[:, i], label=f"x{i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("agent states")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    written.append(_save(fig, stem + "_states.png"))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(times, v, label="V (squared distance to consensus)")
    ax.plot(times, diam, label="diameter")
    ax.plot(times, w_reduced, "--", label="reduced diameter W")
    ax.set_xlabel("t")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    written.append(_save(fig, stem + "_distance.png"))
    return written


def render_optimization_figures(report: OptimizationReport, stem: str) -> list:
    """Switching functions and control staircase next to the CSV stem."""
    written = []
    sw = report.switching

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i in range(sw.values.shape[1]):
        ax.plot(sw.times, sw.values[:, i], label=f"m{i + 1}")
    if sw.values.shape[1] == 2:
        ax.plot(sw.times, sw.margin(), "k--", label="margin m2 - m1")
    ax.axhline(0.0, color="gray", lw=0.8)
    for t in report.control.switch_times():
        ax.axvline(t, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("t")
    ax.set_ylabel("switching functions")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    written.append(_save(fig, stem + "_switching.png"))

    fig, ax = plt.subplots(figsize=(7, 3.5))
    bp = report.control.breakpoints
    for i in range(report.control.r):
        ax.stairs(report.control.values[:, i], bp, label=f"u{i + 1}", baseline=None)
    ax.set_xlabel("t")
    ax.set_ylabel("control")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    written.append(_save(fig, stem + "_control.png"))
    return written


def figure_stem(csv_path: str) -> str:
    return os.path.splitext(csv_path)[0]
