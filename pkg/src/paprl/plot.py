"""Reward-curve SVG from per-seed episode logs.

Each curve is the mean over seeds of a trailing moving average of the episode
reward, drawn with a shaded Student-t 95% band. The output is plain SVG 1.1
with no external references.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import SchemaMismatch
from .harness import confidence_band, read_episode_log

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=60, right=160, top=30, bottom=50)


def moving_average(x: np.ndarray, window: int = 100) -> np.ndarray:
    """Trailing mean over the last ``window`` points (fewer at the start)."""
    if window <= 0:
        raise ValueError("window must be positive")
    x = np.asarray(x, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


def reward_curves(paths: list[str | Path]) -> dict[str, list[np.ndarray]]:
    """Per-agent lists of per-seed reward sequences."""
    if not paths:
        raise SchemaMismatch("no CSV files given")
    curves: dict[str, list[np.ndarray]] = {}
    for path in paths:
        _, rows = read_episode_log(path)
        agents = {r["agent"] for r in rows}
        if len(agents) != 1:
            raise SchemaMismatch(f"{path}: expected one agent per file, found {sorted(agents)}")
        try:
            rewards = np.array([float(r["reward"]) for r in rows])
        except ValueError as exc:
            raise SchemaMismatch(f"{path}: bad reward value ({exc})") from None
        curves.setdefault(agents.pop(), []).append(rewards)
    return curves


def emit_plot(
    paths: list[str | Path], out: str | Path, window: int = 100, title: str = "Reward per episode"
) -> Path:
    """Write one SVG with a band per agent found in ``paths``."""
    curves = reward_curves(paths)
    series = []
    for agent in sorted(curves):
        runs = curves[agent]
        length = min(len(r) for r in runs)
        smoothed = np.array([moving_average(r[:length], window) for r in runs])
        series.append((agent, *confidence_band(smoothed)))
    n_max = max(len(s[1]) for s in series)
    svg = _render(series, n_max, title, window)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return out


def x_pixel(episode: float, n_max: int) -> float:
    span = WIDTH - MARGIN["left"] - MARGIN["right"]
    return MARGIN["left"] + span * episode / max(1, n_max - 1)


def y_pixel(reward: float) -> float:
    span = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    return MARGIN["top"] + span * (1.0 - float(np.clip(reward, 0.0, 1.0)))


def _points(xs, ys, n_max) -> str:
    return " ".join(f"{x_pixel(x, n_max):.2f},{y_pixel(y):.2f}" for x, y in zip(xs, ys))


def _render(series, n_max: int, title: str, window: int) -> str:
    left, top = MARGIN["left"], MARGIN["top"]
    right, bottom = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{(left + right) / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for tick in np.linspace(0.0, 1.0, 6):
        y = y_pixel(tick)
        parts.append(f'<line x1="{left}" y1="{y:.2f}" x2="{right}" y2="{y:.2f}" stroke="#e0e0e0"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{tick:.1f}</text>')
    for tick in np.linspace(0, max(1, n_max - 1), 6):
        x = x_pixel(tick, n_max)
        parts.append(f'<text x="{x:.2f}" y="{bottom + 18}" text-anchor="middle">{int(round(tick))}</text>')
    parts.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">episode</text>')
    parts.append(
        f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">reward (moving average, {window})</text>'
    )
    for i, (agent, mean, lo, hi) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        xs = np.arange(len(mean))
        band = _points(xs, hi, n_max) + " " + _points(xs[::-1], lo[::-1], n_max)
        parts.append(f'<polygon class="band" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        parts.append(
            f'<polyline class="mean" data-agent="{escape(agent)}" points="{_points(xs, mean, n_max)}" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = top + 16 + 20 * i
        parts.append(f'<line x1="{right + 12}" y1="{ly}" x2="{right + 36}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{right + 42}" y="{ly + 4}">{escape(agent)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
