import json

import numpy as np
import pytest

from dalpce.benchmarks import get_case
from dalpce.learner import LearnerConfig, resume, run
from dalpce.serialize import (SCHEMA_VERSION, SchemaError, decomposition_from_dict,
                              decomposition_to_dict, dumps, load_decomposition, load_state,
                              save_decomposition, save_state, state_from_dict, state_to_dict)


@pytest.fixture(scope="module")
def state():
    return run(get_case("singularity2d"), LearnerConfig(dim=2, budget=150, seed=2, n_r=5))


class TestDecomposition:
    def test_roundtrip_bitwise(self, state, tmp_path, rng):
        path = tmp_path / "s.json"
        save_decomposition(state.decomposition, path)
        back = load_decomposition(path)
        x = rng.random((2000, 2))
        np.testing.assert_array_equal(back.global_predict(x), state.decomposition.global_predict(x))
        np.testing.assert_array_equal(back.locate(x), state.decomposition.locate(x))
        assert back.aggregate_q2() == state.decomposition.aggregate_q2()
        assert dumps(decomposition_to_dict(back)) == path.read_text()

    def test_shared_pce_preserved(self, state):
        back = decomposition_from_dict(decomposition_to_dict(state.decomposition))
        for a, b in zip(state.decomposition, back):
            assert a.inherited == b.inherited and a.frozen == b.frozen
        ids_a = [id(s.pce) for s in state.decomposition]
        ids_b = [id(s.pce) for s in back]
        # equal sharing pattern
        assert [ids_a.index(i) for i in ids_a] == [ids_b.index(i) for i in ids_b]

    def test_wrong_version(self, state):
        doc = decomposition_to_dict(state.decomposition)
        doc["schema_version"] = SCHEMA_VERSION + 1
        with pytest.raises(SchemaError):
            decomposition_from_dict(doc)

    def test_missing_field(self, state):
        doc = decomposition_to_dict(state.decomposition)
        del doc["tree"]
        with pytest.raises(SchemaError):
            decomposition_from_dict(doc)

    def test_bad_tree(self, state):
        doc = decomposition_to_dict(state.decomposition)
        doc["tree"]["leaf"] = [0] * len(doc["tree"]["leaf"])
        with pytest.raises(SchemaError):
            decomposition_from_dict(doc)

    def test_valid_json(self, state):
        doc = json.loads(dumps(decomposition_to_dict(state.decomposition)))
        assert doc["kind"] == "decomposition" and doc["dim"] == 2


class TestState:
    def test_roundtrip(self, state, tmp_path):
        path = tmp_path / "state.json"
        save_state(state, path)
        back = load_state(path)
        assert dumps(state_to_dict(back)) == path.read_text()
        np.testing.assert_array_equal(back.ed_points, state.ed_points)
        np.testing.assert_array_equal(back.screening.distances, state.screening.distances)

    def test_continuation_identical(self, tmp_path):
        case = get_case("toy1d")
        full = run(case, LearnerConfig(dim=1, budget=90, seed=8, n_r=3))
        part = run(case, LearnerConfig(dim=1, budget=90, seed=8, n_r=3, n_iter=4))
        save_state(part, tmp_path / "p.json")
        loaded = load_state(tmp_path / "p.json")
        loaded.config.n_iter = 10**9
        loaded.stop_reason = None
        resume(loaded, case)
        assert dumps(state_to_dict(loaded)) == dumps(state_to_dict(full))

    def test_timing_optional(self, state):
        assert "wall_ms" not in state_to_dict(state)["events"][0]
        assert "wall_ms" in state_to_dict(state, timing=True)["events"][0]

    def test_decomposition_doc_is_not_state(self, state):
        with pytest.raises(SchemaError):
            state_from_dict(decomposition_to_dict(state.decomposition))

    def test_state_doc_loads_as_decomposition(self, state, tmp_path):
        path = tmp_path / "state.json"
        save_state(state, path)
        assert len(load_decomposition(path)) == len(state.decomposition)
