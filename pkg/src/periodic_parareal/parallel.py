"""Worker pool that runs subinterval propagations concurrently."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .problem import PeriodicProblem
from .propagators import DEFAULT_NEWTON, NewtonSettings, TimeMesh, coarse_propagate, fine_propagate

_WORKER_STATE: dict = {}


def _install(fine_prob, coarse_prob, mesh, newton):
    _WORKER_STATE.update(fine=fine_prob, coarse=coarse_prob, mesh=mesh, newton=newton)


def _propagate(kind: str, n: int, u: np.ndarray) -> np.ndarray:
    st = _WORKER_STATE
    if kind == "fine":
        return fine_propagate(st["fine"], u, n, st["mesh"], st["newton"])
    return coarse_propagate(st["coarse"], u, n, st["mesh"], st["newton"])


def default_workers() -> int:
    return os.cpu_count() or 1


class PropagatorPool:
    """Parallel map of F_n / G_n over subintervals.

    ``workers == 1`` runs in the calling process; otherwise a process pool
    is started once and receives the problems through its initializer.
    Results come back in task order regardless of completion order.
    """

    def __init__(self, fine_prob: PeriodicProblem, coarse_prob: PeriodicProblem, mesh: TimeMesh,
                 workers: int = 1, newton: NewtonSettings = DEFAULT_NEWTON):
        if workers < 1:
            raise ValueError("worker count must be at least 1")
        self.workers = workers
        self.mesh = mesh
        self._args = (fine_prob, coarse_prob, mesh, newton)
        self._executor = None
        if workers > 1:
            self._executor = ProcessPoolExecutor(
                max_workers=workers, initializer=_install, initargs=self._args
            )

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def _map(self, kind: str, ns, starts) -> np.ndarray:
        ns = list(ns)
        starts = [np.asarray(u, dtype=float) for u in starts]
        if self._executor is None:
            _install(*self._args)
            out = [_propagate(kind, n, u) for n, u in zip(ns, starts)]
        else:
            chunk = max(1, math.ceil(len(ns) / self.workers))
            out = list(self._executor.map(_propagate, [kind] * len(ns), ns, starts, chunksize=chunk))
        return np.vstack(out)

    def fine(self, starts, ns=None) -> np.ndarray:
        """F_n(starts[n-1]) for n = 1..len(starts) unless ``ns`` is given."""
        ns = range(1, len(starts) + 1) if ns is None else ns
        return self._map("fine", ns, starts)

    def coarse(self, starts, ns=None) -> np.ndarray:
        ns = range(1, len(starts) + 1) if ns is None else ns
        return self._map("coarse", ns, starts)
