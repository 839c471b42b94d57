"""Machine-teaching lab: learners, the optimal teacher, analysis and the session service."""

import json as _json

from . import _teachlab
from ._teachlab import DomainError, Learner, condition_tags, synthesize

__all__ = [
    "DomainError",
    "Learner",
    "Service",
    "condition_stats",
    "condition_tags",
    "equivalence",
    "replay_file",
    "simulate",
    "solve",
    "synthesize",
]


def solve(epsilon=0.1, tol=1e-10):
    return _json.loads(_teachlab.solve(epsilon, tol))


def simulate(learner, episodes, seed, epsilon=0.1, max_steps=None, r_max=None, margin=0.1, threads=0):
    return _json.loads(_teachlab.simulate(learner, episodes, seed, epsilon, max_steps, r_max, margin, threads))


def equivalence(learners, episodes, seed, epsilon=0.1):
    return _json.loads(_teachlab.equivalence(list(learners), episodes, seed, epsilon))


def replay_file(path):
    return _json.loads(_teachlab.replay_file(str(path)))


def condition_stats(directory, optimal_length=None, do_nothing_threshold=36):
    return _json.loads(_teachlab.condition_stats(str(directory), optimal_length, do_nothing_threshold))


class Service:
    """In-process session backend speaking the HTTP contract (status, decoded body)."""

    def __init__(self, data_dir=None):
        self._svc = _teachlab.Service(None if data_dir is None else str(data_dir))

    def request(self, method, path, body=None, query=None):
        payload = "" if body is None else _json.dumps(body)
        status, text = self._svc.request(method, path, payload, {k: str(v) for k, v in (query or {}).items()})
        if path.endswith("/export") and status == 200:
            return status, [_json.loads(line) for line in text.splitlines() if line]
        return status, _json.loads(text) if text else None
