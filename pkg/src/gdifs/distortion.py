"""Bounded-distortion audit of composed path maps.

For every depth ``p`` the audit records ``rho_p = max Lip+(S_w) / Lip-(S_w)``
over admissible paths ``w`` of length ``p`` and classifies the growth of
``log rho_p`` over the upper half of the audited depths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, PathCapError
from .graph import DEFAULT_PATH_CAP, count_paths
from .system import GDIFS

DEFAULT_PATH_BUDGET = 10**5
DEFAULT_SLOPE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class BdpReport:
    depths: list[int]
    rho: list[float]
    slope: float
    verdict: str  # "bounded" | "unbounded"
    K: float | None
    growth_rate: float | None
    window: tuple[int, int]
    threshold: float
    sample_sizes: dict[int, int] = field(default_factory=dict)
    seed: int | None = None

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def to_dict(self) -> dict:
        return {
            "depths": self.depths,
            "rho": self.rho,
            "slope": self.slope,
            "verdict": self.verdict,
            "K": self.K,
            "growth_rate": self.growth_rate,
            "window": list(self.window),
            "threshold": self.threshold,
            "sample_sizes": {str(k): v for k, v in sorted(self.sample_sizes.items())},
            "seed": self.seed,
        }


def _expand(system: GDIFS, lin: np.ndarray, term: np.ndarray):
    counts = system.outdeg[term]
    parent = np.repeat(np.arange(len(term)), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    rank = np.arange(len(parent)) - starts
    ptr = np.concatenate([[0], np.cumsum(system.outdeg)])
    flat = np.concatenate(system.out_index)
    edge = flat[ptr[term[parent]] + rank]
    return lin[parent] @ system.linear[edge], system.targets[edge]


def _sample_paths(system: GDIFS, p: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Linear parts of ``size`` paths drawn uniformly among all depth-``p`` paths."""
    # completions[m][k] = number of paths of length m starting at vertex k
    completions = [count_paths(system.graph, m).sum(axis=1).astype(float) for m in range(p + 1)]
    weights = completions[p] / completions[p].sum()
    vert = rng.choice(system.n, size=size, p=weights)
    lin = np.broadcast_to(np.eye(system.dim), (size, system.dim, system.dim)).copy()
    for step in range(p):
        rest = completions[p - step - 1]
        nxt = np.empty(size, dtype=np.int64)
        for v in range(system.n):
            sel = np.flatnonzero(vert == v)
            if sel.size == 0:
                continue
            cand = system.out_index[v]
            w = rest[system.targets[cand]]
            nxt[sel] = rng.choice(cand, size=sel.size, p=w / w.sum())
        lin = lin @ system.linear[nxt]
        vert = system.targets[nxt]
    return lin


def _rho(lin: np.ndarray) -> float:
    sv = np.linalg.svd(lin, compute_uv=False)
    return float(np.max(sv[:, 0] / sv[:, -1]))


def bdp_profile(system: GDIFS, max_depth: int, budget: int = DEFAULT_PATH_BUDGET,
                allow_sampling: bool = False, seed: int | None = 0,
                threshold: float = DEFAULT_SLOPE_THRESHOLD,
                cap: int = DEFAULT_PATH_CAP) -> BdpReport:
    """Distortion profile ``rho_1..rho_max_depth`` and its bounded/unbounded verdict.

    Depths with more than ``budget`` paths are sampled uniformly (when
    ``allow_sampling``) with a generator seeded by ``seed``; otherwise
    :class:`BudgetExceededError` is raised.
    """
    if max_depth < 1 or max_depth > cap:
        raise PathCapError(f"max_depth must be in 1..{cap}, got {max_depth}")
    rng = np.random.default_rng(seed)
    depths = list(range(1, max_depth + 1))
    rho: list[float] = []
    sizes: dict[int, int] = {}
    lin = np.broadcast_to(np.eye(system.dim), (system.n, system.dim, system.dim)).copy()
    term = np.arange(system.n)
    exhaustive = True
    for p in depths:
        total = int(count_paths(system.graph, p).sum())
        if system.is_similarity:
            rho.append(1.0)
            continue
        if exhaustive and total <= budget:
            lin, term = _expand(system, lin, term)
            rho.append(_rho(lin))
            continue
        exhaustive = False
        if total > budget and not allow_sampling:
            raise BudgetExceededError(
                f"{total} paths at depth {p} exceed the budget {budget}; enable sampling"
            )
        size = min(total, budget)
        sampled = _sample_paths(system, p, size, rng)
        sizes[p] = size
        rho.append(_rho(sampled))
    lo = max(1, max_depth // 2)
    window = (lo, max_depth)
    xs = np.arange(lo, max_depth + 1, dtype=float)
    ys = np.log(np.asarray(rho[lo - 1:], dtype=float))
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) >= 2 else 0.0
    if slope <= threshold:
        return BdpReport(depths, rho, slope, "bounded", float(max(rho)), None, window,
                         threshold, sizes, seed)
    return BdpReport(depths, rho, slope, "unbounded", None, float(np.exp(slope)), window,
                     threshold, sizes, seed)
