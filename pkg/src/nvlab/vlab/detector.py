"""Photon-counting models: SPAD sampling, TCSPC histogramming, time tags."""

from typing import Optional, Tuple

import numpy as np


def dead_time_rate(rate: float, dead_time: float) -> float:
    """Non-paralyzable dead-time thinning: r -> r / (1 + r * dead_time)."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if dead_time <= 0:
        return rate
    return rate / (1.0 + rate * dead_time)


def spad_sample(rate: float, dwell: float, rng: np.random.Generator,
                dead_time: float = 0.0) -> int:
    """Poisson counts for a constant detected rate over one dwell."""
    if dwell <= 0:
        raise ValueError("dwell must be > 0")
    return int(rng.poisson(dead_time_rate(rate, dead_time) * dwell))


def tcspc_histogram(time_tags, bin_width: float,
                    window: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray]:
    """Histogram arrival times into right-open bins [edge, edge + width).

    Tags outside the window are dropped; a tag exactly on a bin edge lands
    in the bin starting there. Returns (counts, bin_edges).
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("window must have positive length")
    tags = np.asarray(time_tags, dtype=float)
    n_bins = int(np.ceil((t1 - t0) / bin_width))
    edges = t0 + bin_width * np.arange(n_bins + 1)
    idx = np.floor((tags - t0) / bin_width).astype(int)
    keep = (tags >= t0) & (tags < t1) & (idx >= 0) & (idx < n_bins)
    counts = np.bincount(idx[keep], minlength=n_bins)
    return counts.astype(np.int64), edges


def draw_time_tags(grid_times: np.ndarray, grid_rates: np.ndarray,
                   rng: np.random.Generator,
                   max_tags: Optional[int] = None) -> np.ndarray:
    """Photon arrival times from a rate profile via thinning.

    ``grid_rates[i]`` is the detected rate on [grid_times[i], grid_times[i+1]);
    the per-cell upper bound is the larger of the two endpoint rates (the
    profile is piecewise-smooth on the grid), candidates are drawn from the
    bound and accepted with probability rate/bound under linear
    interpolation.
    """
    t = np.asarray(grid_times, dtype=float)
    r = np.asarray(grid_rates, dtype=float)
    if len(t) != len(r) + 1:
        raise ValueError("need len(grid_times) == len(grid_rates) + 1")
    if (r < 0).any():
        raise ValueError("rates must be >= 0")
    r_nodes = np.concatenate([r[:1], 0.5 * (r[1:] + r[:-1]), r[-1:]])
    bounds = np.maximum(r, np.maximum(r_nodes[:-1], r_nodes[1:])) * (1 + 1e-9)
    dt = np.diff(t)
    tags = []
    for i in range(len(r)):
        if bounds[i] <= 0:
            continue
        n = rng.poisson(bounds[i] * dt[i])
        if n == 0:
            continue
        cand = rng.uniform(t[i], t[i + 1], size=n)
        frac = (cand - t[i]) / dt[i]
        local = r_nodes[i] + (r_nodes[i + 1] - r_nodes[i]) * frac
        accept = rng.uniform(0.0, bounds[i], size=n) < local
        tags.append(cand[accept])
    if not tags:
        return np.empty(0)
    out = np.sort(np.concatenate(tags))
    if max_tags is not None and len(out) > max_tags:
        out = out[:max_tags]
    return out
