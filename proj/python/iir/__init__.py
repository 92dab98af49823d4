"""Python access to the interactive retrieval core."""

import json as _json

from ._iir import (  # noqa: F401
    Experiment as _Experiment,
    IirError,
    ServiceError,
    average_precision,
    episode_seed,
    oracle_sequence_count,
    tokenize,
)
from ._iir import write_synthetic as _write_synthetic


def write_synthetic(directory, config=None):
    _write_synthetic(str(directory), _json.dumps(config or {}))


class Experiment:
    """Corpus, retrieval models and simulated user built from a config dict."""

    def __init__(self, config=None):
        self._exp = _Experiment(_json.dumps(config or {}))

    @property
    def num_documents(self):
        return self._exp.num_documents

    def query_ids(self):
        return self._exp.query_ids()

    def rank(self, text, top=10):
        return self._exp.rank(text, top)

    def first_pass_map(self):
        return self._exp.first_pass_map()

    def evaluate_random(self, episodes, seed=0):
        return self._exp.evaluate_random(episodes, seed)

    def evaluate_script(self, actions, episodes=1):
        return self._exp.evaluate_script(list(actions), episodes)

    def oracle(self, qid, max_len=4, seed=0):
        return _json.loads(self._exp.oracle(qid, max_len, seed))

    def crossval(self, policies):
        return _json.loads(self._exp.crossval(list(policies)))

    def create_session(self, query, policy="random", **extra):
        body = {"query": query, "policy": policy, **extra}
        return _json.loads(self._exp.create_session(_json.dumps(body)))

    def step_session(self, session_id, response):
        return _json.loads(self._exp.step_session(session_id, _json.dumps(response)))

    def get_session(self, session_id):
        return _json.loads(self._exp.get_session(session_id))
