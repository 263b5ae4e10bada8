"""Seeded synthetic recordings standing in for real hand-guided sessions.

Letters are open "C" strokes drawn counter-clockwise from the upper right,
recorded at 10 Hz with a dwell at the start, rounded to three decimals.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .trajectory import Trajectory, write_trajectory

DEFAULT_LETTER_COUNT = 9


def _smooth_profile(n: int) -> np.ndarray:
    # ease in / ease out, like an operator accelerating and braking
    tau = np.linspace(0.0, 1.0, n)
    return 0.5 - 0.5 * np.cos(np.pi * tau)


def make_letter_c(rng: np.random.Generator, label: str | None = None) -> Trajectory:
    """One perturbed hand-guided "C" with 80 to 200 samples."""
    center = np.array([-0.40, 0.27]) + rng.normal(0.0, 0.012, size=2)
    radius = 0.16 + rng.uniform(-0.015, 0.015)
    aspect = 1.0 + rng.uniform(-0.08, 0.08)
    start = np.deg2rad(40.0 + rng.uniform(-10.0, 10.0))
    stop = np.deg2rad(320.0 + rng.uniform(-10.0, 10.0))

    moving = int(rng.integers(76, 151))
    theta = start + (stop - start) * _smooth_profile(moving)
    wobble = np.zeros_like(theta)
    for freq in (1, 2, 3):
        wobble += rng.normal(0.0, 0.015 / freq) * np.sin(freq * theta + rng.uniform(0, 2 * np.pi))
    r = radius * (1.0 + wobble)
    pts = np.column_stack([center[0] + r * np.cos(theta) / aspect,
                           center[1] + r * np.sin(theta) * aspect])
    pts = np.round(pts, 3)

    head = np.repeat(pts[:1], int(rng.integers(5, 13)), axis=0)
    tail = np.repeat(pts[-1:], int(rng.integers(2, 8)), axis=0)
    return Trajectory(np.vstack([head, pts[1:-1], tail]), label=label)


def make_biopsy_path(rng: np.random.Generator) -> Trajectory:
    """Approach arc, slow straight insertion to the target and a retraction."""
    home = np.array([0.35, -0.25, 0.55]) + rng.normal(0.0, 0.01, size=3)
    entry = np.array([0.0, 0.0, 0.15]) + rng.normal(0.0, 0.005, size=3)
    target = entry + np.array([0.03, -0.02, -0.12]) + rng.normal(0.0, 0.003, size=3)
    bow = np.array([0.15, 0.2, 0.1])

    s = _smooth_profile(int(rng.integers(60, 80)))
    approach = (1 - s)[:, None] * home + s[:, None] * entry + (np.sin(np.pi * s))[:, None] * bow
    s = _smooth_profile(int(rng.integers(40, 60)))
    insert = entry + s[:, None] * (target - entry)
    s = _smooth_profile(int(rng.integers(30, 40)))
    retract = target + s[:, None] * (entry + np.array([0.0, 0.05, 0.1]) - target)

    dwell_entry = np.repeat(approach[-1:], 8, axis=0)
    dwell_target = np.repeat(insert[-1:], 10, axis=0)
    pts = np.vstack([approach, dwell_entry, insert[1:], dwell_target, retract[1:]])
    return Trajectory(np.round(pts, 4), label="biopsy")


def make_helix(n: int = 120, radius: float = 0.3, pitch: float = 0.1, turns: float = 3.0,
               ) -> Trajectory:
    theta = np.linspace(0.0, 2 * np.pi * turns, n)
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta),
                           pitch * theta / (2 * np.pi)])
    return Trajectory(pts, label="helix")


def demo_letters(seed: int = 0, count: int = DEFAULT_LETTER_COUNT) -> list[Trajectory]:
    rng = np.random.default_rng(seed)
    return [make_letter_c(rng, label=f"letter_{i + 1:02d}") for i in range(count)]


def write_demo(out_dir: Path, seed: int = 0, count: int = DEFAULT_LETTER_COUNT) -> list[Path]:
    """Write letters/letter_NN.csv, biopsy.csv and helix.csv under ``out_dir``."""
    out_dir = Path(out_dir)
    letters_dir = out_dir / "letters"
    letters_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for t in demo_letters(seed, count):
        path = letters_dir / f"{t.label}.csv"
        write_trajectory(t, path)
        written.append(path)
    rng = np.random.default_rng([seed, 1])
    for name, traj in (("biopsy.csv", make_biopsy_path(rng)), ("helix.csv", make_helix())):
        write_trajectory(traj, out_dir / name)
        written.append(out_dir / name)
    return written
