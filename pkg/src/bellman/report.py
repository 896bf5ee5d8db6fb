"""Figure rendering for the report path: surfaces, foliations, optimizers.

Each report writes PNG figures next to the delimited data they visualize,
so a run leaves both the plottable CSVs and the rendered views in one
directory.
"""

from __future__ import annotations

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import candidates as cand
from . import monge_ampere as ma
from . import optimizers as opt
from .candidates import CandidateSurface


def _surface_heatmap(ax, value, x1s, t_of, levels=40, title=""):
    X1, T = np.meshgrid(x1s, t_of, indexing="ij")
    Z = value(X1, T)
    pc = ax.contourf(X1, T, Z, levels=levels)
    ax.set_xlabel("x1")
    ax.set_title(title)
    return pc


def render_jn(out_dir: str, eps: float, delta: float | None) -> list:
    delta = delta or eps
    files = []
    surface = CandidateSurface.jn(eps, delta)
    x1s = np.linspace(-1.0, 1.0, 201)
    ts = np.linspace(0.0, eps * eps, 101)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    pc = _surface_heatmap(
        ax1, lambda X1, T: cand.jn_value_raw(X1, X1 ** 2 + T, delta), x1s, ts,
        title=f"exponential bound, eps={eps}, delta={delta}")
    ax1.set_ylabel("t = x2 - x1^2")
    fig.colorbar(pc, ax=ax1)
    for x1 in np.linspace(-0.6, 0.6, 7):
        line = ma.jn_extremal_line(x1, x1 * x1 + 0.5 * eps ** 2, delta)
        xs = np.linspace(line.u, line.a, 50)
        ax2.plot(xs, line.x2_of_x1(xs) - xs ** 2, lw=0.8)
    ax2.set_xlabel("x1")
    ax2.set_title("extremal tangent lines (reduced coordinates)")
    ax2.set_ylim(0, delta * delta * 1.05)
    path = os.path.join(out_dir, f"jn_surface_eps{eps}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files.append(path)

    f = opt.jn_optimizer(0.0, eps * eps, eps, 14)
    csv_path = os.path.join(out_dir, f"jn_optimizer_eps{eps}.csv")
    f.to_csv(csv_path)
    files.append(csv_path)
    fig, ax = plt.subplots(figsize=(6.5, 4))
    edges = np.linspace(0, 1, (1 << 14) + 1)
    ax.step(edges[:-1], f.values, where="post", lw=0.7)
    ax.set_xlabel("t")
    ax.set_ylabel("phi(t)")
    ax.set_title(f"logarithmic optimizer at (0, eps^2), eps={eps}")
    path = os.path.join(out_dir, f"jn_optimizer_eps{eps}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files.append(path)
    return files


def render_buckley(out_dir: str, delta: float) -> list:
    files = []
    s = np.linspace(1.0, delta, 300)
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(s, 8 * np.log(s), label="8 log s")
    ax.axhline(8 * math.log(delta), ls="--", lw=0.8,
               label=f"8 log delta = {8 * math.log(delta):.4f}")
    ax.set_xlabel("s = x1 e^{-x2}")
    ax.set_title(f"square-ratio bound, delta={delta}")
    ax.legend()
    path = os.path.join(out_dir, f"buckley_g_delta{delta}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files.append(path)
    return files


def render_maximal(out_dir: str, L: float) -> list:
    files = []
    surface = CandidateSurface.maximal(L)
    x1s = np.linspace(0.02 * L, L, 160)
    x2_max = 3.0 * L * L
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    X1 = x1s[:, None]
    X2 = np.linspace(0, x2_max, 160)[None, :]
    Z = np.where(X2 >= X1 ** 2, cand.maximal_value_raw(X1, X2, L), np.nan)
    pc = ax1.contourf(np.broadcast_to(X1, Z.shape),
                      np.broadcast_to(X2, Z.shape), Z, levels=40)
    ax1.plot(x1s, x1s ** 2, "k-", lw=1)
    ax1.set_xlabel("x1"); ax1.set_ylabel("x2")
    ax1.set_title(f"maximal-operator value, L={L}")
    fig.colorbar(pc, ax=ax1)
    for x1 in np.linspace(0.55 * L, 0.98 * L, 6):
        fl = ma.maximal_fan_line(x1, x1 * x1 + 0.4 * L * L, L)
        xs = np.linspace(fl.u, L, 40)
        ax2.plot(xs, fl.x2_of_x1(xs), lw=0.8)
    ax2.plot(x1s, x1s ** 2, "k-", lw=1)
    ax2.set_title("fan of extremal lines through (L/2, 0)")
    ax2.set_xlabel("x1")
    path = os.path.join(out_dir, f"maximal_surface_L{L}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files.append(path)

    mo = opt.maximal_optimizer(L, 2.0 * L * L, 4, fill_tol=1e-3)
    csv_path = os.path.join(out_dir, f"maximal_optimizer_L{L}.csv")
    mo.w.to_csv(csv_path)
    files.append(csv_path)
    fig, ax = plt.subplots(figsize=(6.5, 4))
    edges = np.linspace(0, 1, mo.w.values.size + 1)
    ax.step(edges[:-1], mo.w.values, where="post", lw=0.5)
    ax.set_xlabel("t"); ax.set_ylabel("w(t)")
    ax.set_title(f"self-similar optimizer, n={mo.n}, alpha_n={mo.alpha_n:.4f}")
    path = os.path.join(out_dir, f"maximal_optimizer_L{L}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files.append(path)
    return files


def render_two_weight(out_dir: str, m: float, M: float) -> list:
    files = []
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    x1 = np.linspace(0.05, 3.0, 200)[:, None]
    x2 = np.linspace(0.05, 3.0, 200)[None, :]
    s = x1 * x2
    Z = np.where((s >= m * m) & (s <= M * M),
                 cand.two_weight_value_raw(x1, x2, m, M), np.nan)
    pc = ax.contourf(np.broadcast_to(x1, Z.shape),
                     np.broadcast_to(x2, Z.shape), Z, levels=40)
    ax.set_xlabel("x1"); ax.set_ylabel("x2")
    ax.set_title(f"two-weight bound, m={m}, M={M}")
    fig.colorbar(pc, ax=ax)
    path = os.path.join(out_dir, f"two_weight_m{m}_M{M}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    files.append(path)
    return files


def render(problem: str, out_dir: str, eps=0.5, delta=None, L=1.0,
           m=0.0, M=2.0, depth=16) -> list:
    os.makedirs(out_dir, exist_ok=True)
    if problem == "jn":
        return render_jn(out_dir, eps, delta)
    if problem == "buckley":
        return render_buckley(out_dir, delta or 2.0)
    if problem == "maximal":
        return render_maximal(out_dir, L)
    if problem == "two-weight":
        return render_two_weight(out_dir, m, M)
    raise ValueError(f"unknown problem {problem!r}")
