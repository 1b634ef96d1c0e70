import os
import subprocess
import sys

import numpy as np
import pytest

from dalpce import _backend, _kernels
from dalpce.benchmarks import get_case
from dalpce.learner import LearnerConfig, run

needs_numba = pytest.mark.skipif(_kernels.numba_kernels is None, reason="numba not installed")


@pytest.fixture(scope="module")
def fitted():
    state = run(get_case("singularity2d"), LearnerConfig(dim=2, budget=200, seed=0))
    return state


@needs_numba
class TestParity:
    def test_locate_tree(self, fitted, rng):
        x = rng.random((5000, 2))
        tree = fitted.decomposition.tree_arrays()
        np.testing.assert_array_equal(_kernels.numba_kernels.locate_tree(x, *tree),
                                      _kernels.numpy_kernels.locate_tree(x, *tree))

    @pytest.mark.parametrize("skip", [False, True])
    def test_eval_packed(self, fitted, rng, skip):
        decomp = fitted.decomposition
        x = rng.random((5000, 2))
        owner = decomp.locate(x)
        a = _kernels.numba_kernels.eval_packed(x, owner, *decomp.packed(), skip)
        b = _kernels.numpy_kernels.eval_packed(x, owner, *decomp.packed(), skip)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12 * np.abs(b).max())

    def test_nearest_update(self, rng):
        cands = rng.random((700, 3))
        pts = rng.random((90, 3))
        out = []
        for k in (_kernels.numba_kernels, _kernels.numpy_kernels):
            d2 = np.full(len(cands), np.inf)
            idx = np.full(len(cands), -1, dtype=np.int64)
            k.nearest_update(cands, pts[:40], 0, d2, idx)
            k.nearest_update(cands, pts[40:], 40, d2, idx)
            out.append((d2, idx))
        np.testing.assert_array_equal(out[0][0], out[1][0])
        np.testing.assert_array_equal(out[0][1], out[1][1])


class TestBackendFlag:
    @pytest.mark.parametrize("flag", ["numpy", "numba"])
    def test_env_selects_backend(self, flag):
        env = dict(os.environ, DALPCE_BACKEND=flag)
        out = subprocess.run([sys.executable, "-c", "from dalpce import _backend; print(_backend.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        expected = flag if (flag == "numpy" or _backend.HAS_NUMBA) else "numpy"
        assert out.stdout.strip() == expected

    def test_threads_validation(self):
        with pytest.raises(ValueError):
            _backend.configure_threads("many")
        with pytest.raises(ValueError):
            _backend.configure_threads(-1)

    @needs_numba
    def test_threads_clamped(self):
        import numba
        try:
            assert _backend.configure_threads(10**4) == numba.config.NUMBA_NUM_THREADS
            assert _backend.configure_threads(1) == 1
        finally:
            _backend.configure_threads(0)

    def test_backends_give_same_run(self):
        code = ("from dalpce.learner import LearnerConfig, run;"
                "from dalpce.benchmarks import get_case;"
                "from dalpce.serialize import dumps, state_to_dict;"
                "import hashlib;"
                "s = run(get_case('toy1d'), LearnerConfig(dim=1, budget=60, seed=4));"
                "print(len(s.decomposition), s.evaluations)")
        outs = []
        for flag in ("numpy", "numba"):
            env = dict(os.environ, DALPCE_BACKEND=flag)
            outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                       text=True, check=True).stdout)
        assert outs[0] == outs[1]
