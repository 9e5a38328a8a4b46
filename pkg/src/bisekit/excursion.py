"""Brownian excursions on a uniform grid and the tree pseudometric they code."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ArgumentError, ResourceBudgetError


@dataclass
class ExcursionPath:
    """Nonnegative path sampled at ``dt`` spacing, zero at both ends.

    ``values[i]`` is the height at time ``i * dt``. Times past the end read 0.
    """

    values: np.ndarray
    dt: float

    @property
    def duration(self):
        return self.dt * (len(self.values) - 1)

    @property
    def times(self):
        return np.arange(len(self.values)) * self.dt

    def height(self, t):
        """Linearly interpolated height at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ArgumentError("negative time")
        return np.interp(t / self.dt, np.arange(len(self.values)), self.values, right=0.0)

    def to_csv(self, path=None):
        lines = ["t,value"] + [f"{i * self.dt!r},{float(v)!r}" for i, v in enumerate(self.values)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _check_grid(grid_points):
    if int(grid_points) != grid_points or grid_points < 3:
        raise ArgumentError(f"grid_points must be an integer >= 3, got {grid_points}")
    return int(grid_points)


def vervaat(bridge):
    """Cyclic shift of a bridge so that it starts at its minimum."""
    bridge = np.asarray(bridge, dtype=float)
    body = bridge[..., :-1]
    m = np.argmin(body, axis=-1)
    n = body.shape[-1]
    idx = (np.arange(n) + m[..., None]) % n
    shifted = np.take_along_axis(body, idx, axis=-1) - np.take_along_axis(body, m[..., None], axis=-1)
    zero = np.zeros(shifted.shape[:-1] + (1,))
    return np.concatenate([shifted, zero], axis=-1)


def sample_normalized_batch(grid_points, count, rng):
    """``count`` normalized excursions on ``grid_points`` points, as rows of an array."""
    n = _check_grid(grid_points) - 1
    steps = rng.standard_normal((count, n)) * math.sqrt(1.0 / n)
    walk = np.concatenate([np.zeros((count, 1)), np.cumsum(steps, axis=1)], axis=1)
    bridge = walk - np.linspace(0.0, 1.0, n + 1) * walk[:, -1:]
    return vervaat(bridge)


def sample_normalized(grid_points, rng):
    """A normalized excursion (duration 1) from a rotated Gaussian bridge."""
    values = sample_normalized_batch(grid_points, 1, rng)[0]
    return ExcursionPath(values, 1.0 / (len(values) - 1))


def _climb(h, sd, rng, chunk=4096):
    """Run a walk from 0 until |W| >= h. Returns the signed path so far."""
    pieces = []
    level = 0.0
    while True:
        w = level + np.cumsum(rng.standard_normal(chunk) * sd)
        hit = np.flatnonzero(np.abs(w) >= h)
        if hit.size:
            pieces.append(w[: hit[0] + 1])
            return np.concatenate(pieces)
        pieces.append(w)
        level = w[-1]
        # only the current excursion matters; drop history before the last sign change
        joined = np.concatenate(pieces)
        flips = np.flatnonzero(np.sign(joined[1:]) != np.sign(joined[:-1]))
        if flips.size:
            joined = joined[flips[-1] + 1 :]
        pieces = [joined]
        chunk = min(chunk * 2, 1 << 20)


def _ascent(h, dt, rng):
    """Grid values of the excursion from its start up to the first passage at h.

    The walk is run until |W| reaches h and then flipped to the positive side;
    by symmetry of excursions the straddling excursion has the same law as
    one reaching +h, while the expected run length stays finite.
    """
    w = _climb(h, math.sqrt(dt), rng)
    if w[-1] < 0:
        w = -w
    below = np.flatnonzero(w <= 0)
    start = below[-1] + 1 if below.size else 0
    return np.concatenate([[0.0], w[start:]])


def _descent_steps(level, dt, rng):
    """Grid steps until a Brownian motion started at ``level`` first hits 0."""
    z = rng.standard_normal()
    while z == 0.0:
        z = rng.standard_normal()
    return max(1, math.ceil((level / z) ** 2 / dt))


def _descent(level, steps, dt, rng):
    """Brownian path from ``level`` to 0 that first hits 0 after ``steps`` grid steps.

    Reversed in time this is a three-dimensional Bessel bridge from 0 to
    ``level``, i.e. the norm of a 3d Brownian bridge.
    """
    inc = rng.standard_normal((steps, 3)) * math.sqrt(dt)
    walk = np.concatenate([np.zeros((1, 3)), np.cumsum(inc, axis=0)])
    frac = np.linspace(0.0, 1.0, steps + 1)[:, None]
    bridge = walk - frac * walk[-1]
    bridge[:, 0] += frac[:, 0] * level
    radius = np.linalg.norm(bridge, axis=1)
    radius[0] = 0.0
    radius[-1] = level
    return radius[::-1]


def _validate_height(h, dt):
    if not (h > 0 and math.isfinite(h)):
        raise ArgumentError("height must be positive")
    if not (dt > 0 and math.isfinite(dt)):
        raise ArgumentError("dt must be positive")


def sample_height_conditioned_duration(h, dt, rng):
    """Duration of the height-conditioned excursion, without building the path.

    Consumes randomness exactly like ``sample_height_conditioned`` so both
    report the same duration under the same seed.
    """
    _validate_height(h, dt)
    up = _ascent(h, dt, rng)
    down = _descent_steps(up[-1], dt, rng)
    return dt * (len(up) - 1 + down)


def sample_height_conditioned(h, dt, rng, max_steps=1 << 23, max_duration=None, max_attempts=100_000):
    """Excursion of a standard Brownian motion straddling its first passage at ``h``.

    The part before the first passage is simulated on the grid. The remainder
    is a first-passage bridge down to 0 whose length is drawn exactly.
    ``max_duration`` conditions on a finite duration by rejection. Raises
    ``ResourceBudgetError`` if the path would exceed ``max_steps``.
    """
    _validate_height(h, dt)
    if max_duration is not None and not max_duration > 0:
        raise ArgumentError("max_duration must be positive")
    for attempt in range(1, max_attempts + 1):
        up = _ascent(h, dt, rng)
        down = _descent_steps(up[-1], dt, rng)
        total = len(up) - 1 + down
        if max_duration is None or dt * total <= max_duration:
            break
    else:
        raise ResourceBudgetError(f"no excursion shorter than {max_duration} in {max_attempts} attempts", attempts=max_attempts)
    if total > max_steps:
        raise ResourceBudgetError(f"excursion needs {total} grid steps, budget is {max_steps}")
    tail = _descent(up[-1], down, dt, rng)
    values = np.concatenate([up, tail[1:]])
    values[-1] = 0.0
    return ExcursionPath(values, dt)


def excursion_distance(path, s, t):
    """Tree distance e(s) + e(t) - 2 min e over [s, t]."""
    if s < 0 or t < 0:
        raise ArgumentError("negative time")
    lo, hi = min(s, t), max(s, t)
    es, et = path.height(lo), path.height(hi)
    return float(es + et - 2 * min_between(path, lo, hi))


def min_between(path, lo, hi):
    """Minimum of the interpolated path over [lo, hi]."""
    es, et = float(path.height(lo)), float(path.height(hi))
    i = math.floor(lo / path.dt) + 1
    j = math.ceil(hi / path.dt)
    inner = path.values[i:min(j, len(path.values))]
    m = min(es, et)
    if inner.size:
        m = min(m, float(inner.min()))
    if hi > path.duration:
        m = 0.0
    return m
