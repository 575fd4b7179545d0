"""Figure rendering for experiment tables, saved next to the CSVs."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finite(values, cap=None):
    out = np.asarray([v if math.isfinite(v) else np.nan for v in values], dtype=float)
    if cap is not None:
        out = np.minimum(out, cap)
    return out


def _save(fig, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def plot_trace(res, traj, path) -> str:
    """State vs reference components plus the applied command."""
    n = res.states.shape[1]
    m = res.applied.shape[1]
    fig, axes = plt.subplots(n + 1, 1, figsize=(7, 2.2 * (n + 1)), sharex=True)
    r_vals = np.array([traj.r(float(t)) for t in res.times])
    for i in range(n):
        axes[i].plot(res.times, res.states[:, i], label=f"x{i}")
        axes[i].plot(res.times, r_vals[:, i], "--", label=f"r{i}")
        axes[i].set_ylabel(f"x{i}")
        axes[i].legend(loc="upper right", fontsize=8)
        axes[i].grid(alpha=0.3)
    for j in range(m):
        axes[n].plot(res.times, res.applied[:, j], label=f"u_applied{j}")
    axes[n].plot(res.times, res.actuator[:, 0], alpha=0.7, label="eta0")
    axes[n].set_ylabel("command")
    axes[n].set_xlabel("time [s]")
    axes[n].legend(loc="upper right", fontsize=8)
    axes[n].grid(alpha=0.3)
    fig.suptitle("closed-loop trace" + (" (unstable)" if res.unstable else ""))
    return _save(fig, path)


def _grouped_curves(ax, rows, xkey, ykey, groupkey):
    groups = sorted({row[groupkey] for row in rows})
    for g in groups:
        sel = [row for row in rows if row[groupkey] == g]
        sel.sort(key=lambda r: r[xkey])
        ax.plot([r[xkey] for r in sel], _finite([r[ykey] for r in sel]),
                marker="o", ms=3, label=f"{groupkey}={g}")


def plot_fig2(rows, path) -> str:
    modes = sorted({r["mode"] for r in rows})
    ws = sorted({r["w"] for r in rows})
    fig, axes = plt.subplots(len(modes), len(ws),
                             figsize=(3.2 * len(ws), 2.8 * len(modes)),
                             sharex=True, squeeze=False)
    delta_s0 = sorted({r["delta_s"] for r in rows})[0]
    for i, mode in enumerate(modes):
        for j, w in enumerate(ws):
            ax = axes[i][j]
            sel = [r for r in rows
                   if r["mode"] == mode and r["w"] == w and r["delta_s"] == delta_s0]
            _grouped_curves(ax, sel, "delta_c", "delta_lo", "p")
            ax.set_title(f"{mode}, w={w}", fontsize=9)
            ax.set_yscale("log")
            ax.grid(alpha=0.3)
            if i == len(modes) - 1:
                ax.set_xlabel("delta_c [s]")
            if j == 0:
                ax.set_ylabel("total error bound")
    axes[0][0].legend(fontsize=7)
    return _save(fig, path)


def plot_fig3(rows, path) -> str:
    modes = sorted({r["mode"] for r in rows})
    ws = sorted({r["w"] for r in rows})
    fig, axes = plt.subplots(len(modes), len(ws),
                             figsize=(3.2 * len(ws), 2.8 * len(modes)),
                             sharex=True, squeeze=False)
    for i, mode in enumerate(modes):
        for j, w in enumerate(ws):
            ax = axes[i][j]
            sel = [r for r in rows if r["mode"] == mode and r["w"] == w]
            _grouped_curves(ax, sel, "delta_c", "rmse_ss", "p")
            ax.set_title(f"{mode}, w={w}", fontsize=9)
            ax.set_yscale("log")
            ax.grid(alpha=0.3)
            if i == len(modes) - 1:
                ax.set_xlabel("delta_c [s]")
            if j == 0:
                ax.set_ylabel("steady-state RMSE")
    axes[0][0].legend(fontsize=7)
    return _save(fig, path)


def plot_fig4(rows, path) -> str:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    cap = 10.0  # divergent cells plotted at the cap
    for name in sorted({r["controller"] for r in rows}):
        sel = [r for r in rows if r["axis"] == "delta_s" and r["controller"] == name]
        sel.sort(key=lambda r: r["delta_s"])
        ax1.plot([r["delta_s"] for r in sel],
                 _finite([r["rmse_ss"] for r in sel], cap), marker="o", ms=3,
                 label=name)
        sel = [r for r in rows if r["axis"] == "omega" and r["controller"] == name]
        sel.sort(key=lambda r: r["omega"])
        ax2.plot([r["omega"] for r in sel],
                 _finite([r["rmse_ss"] for r in sel], cap), marker="o", ms=3,
                 label=name)
    ax1.set_xlabel("delta_s [s]")
    ax2.set_xlabel("omega [rad/s]")
    for ax in (ax1, ax2):
        ax.set_ylabel("steady-state RMSE")
        ax.set_yscale("log")
        ax.grid(alpha=0.3)
    ax1.legend(fontsize=8)
    return _save(fig, path)


def plot_fig5(rows, path) -> str:
    s_vals = sorted({r["s"] for r in rows})
    q_vals = sorted({r["q"] for r in rows})
    grid = np.full((len(q_vals), len(s_vals)), np.nan)
    for row in rows:
        i = q_vals.index(row["q"])
        j = s_vals.index(row["s"])
        v = row["rmse_ss"]
        grid[i, j] = math.log10(v) if math.isfinite(v) and v > 0 else 2.0
    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(s_vals, q_vals, grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="log10 steady-state RMSE")
    ax.set_xlabel("combined delay s = delta + 1/lambda [s]")
    ax.set_ylabel("first-order share q = 1/(lambda*delta + 1)")
    return _save(fig, path)


def plot_bounds_curve(points, path) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    by_p = {}
    for pt in points:
        by_p.setdefault(pt.p, []).append(pt)
    for p, pts in sorted(by_p.items()):
        pts.sort(key=lambda q: q.delta_c)
        ax.plot([q.delta_c for q in pts], _finite([q.delta_lo for q in pts]),
                marker="o", ms=3, label=f"p={p}")
    ax.set_xlabel("delta_c [s]")
    ax.set_ylabel("total error bound")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)
