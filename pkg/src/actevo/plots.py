"""Figure rendering for run artifacts.

Every delimited output the CLI writes gets a matching PNG: activation
curves next to their curve CSVs, a fitness trace next to the generation
log, and per-run F1 bars next to the baseline table.  Files are written
atomically (temp file + rename).
"""

from __future__ import annotations

import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _save_atomic(fig, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=150)
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def save_curve_figure(points: list[tuple[float, float]], title: str, path: str) -> None:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(xs, ys, lw=1.2)
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.axvline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("activation(x)")
    ax.set_title(title)
    fig.tight_layout()
    _save_atomic(fig, path)


def save_fitness_figure(records, path: str) -> None:
    generations = [r.generation for r in records]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(generations, [r.elite_fitness for r in records], label="elite", lw=1.5)
    ax.plot(generations, [r.best_fitness for r in records], label="population best", lw=1.0)
    ax.plot(generations, [r.mean_fitness for r in records], label="population mean", lw=1.0)
    ax.set_xlabel("generation")
    ax.set_ylabel("fitness")
    ax.legend()
    fig.tight_layout()
    _save_atomic(fig, path)


def save_baseline_figure(f1_scores: list[float], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(range(len(f1_scores)), f1_scores)
    ax.axhline(max(f1_scores), color="grey", lw=0.8, ls="--")
    ax.set_xlabel("run")
    ax.set_ylabel("test F1")
    ax.set_ylim(0.0, 1.05)
    fig.tight_layout()
    _save_atomic(fig, path)
