"""Counter-based Gaussian noise for reproducible trajectory ensembles.

Each trajectory owns a Philox key derived from ``(seed, trajectory)``. Step
``s`` consumes exactly one Philox block (four 64-bit words), turned into four
standard normals by the Box-Muller transform; channel ``k`` reads normal ``k``.
A draw is therefore a pure function of ``(seed, trajectory, step, channel)``,
independent of chunking, worker count or scheduling.
"""
from __future__ import annotations

import numpy as np

MAX_CHANNELS = 4
_TWO_M53 = 2.0**-53


def trajectory_key(seed, trajectory):
    if seed < 0 or trajectory < 0:
        raise ValueError("seed and trajectory index must be non-negative")
    return np.random.SeedSequence([int(seed), int(trajectory)]).generate_state(2, np.uint64)


def _box_muller(raw):
    # raw: (..., 4) uint64 -> (..., 4) standard normals
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53  # (0, 1]
    u1, u2 = u[..., 0::2], u[..., 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    out = np.empty(raw.shape, dtype=np.float64)
    out[..., 0::2] = r * np.cos(ang)
    out[..., 1::2] = r * np.sin(ang)
    return out


def standard_normals(seed, trajectory, start, count, channels):
    """Standard normals for steps ``start .. start+count-1``, shape ``(count, channels)``."""
    if not 0 < channels <= MAX_CHANNELS:
        raise ValueError(f"channels must be in 1..{MAX_CHANNELS}")
    bg = np.random.Philox(key=trajectory_key(seed, trajectory), counter=int(start))
    raw = bg.random_raw(4 * count).reshape(count, 4)
    return _box_muller(raw)[:, :channels]


def noise_draw(seed, trajectory, step, channel, dt):
    """A single white-noise value ``xi ~ Normal(0, 1/dt)``."""
    return float(standard_normals(seed, trajectory, step, 1, channel + 1)[0, channel] / np.sqrt(dt))


def ensemble_normals(seed, trajectories, start, count, channels):
    """Stacked standard normals, shape ``(count, len(trajectories), channels)``."""
    out = np.empty((count, len(trajectories), channels))
    for i, t in enumerate(trajectories):
        out[:, i, :] = standard_normals(seed, t, start, count, channels)
    return out
