import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opmimo import _bcjr_py, kernels
from opmimo.coding import trellis
from opmimo.config import CodeSpec


def _backend_in_subprocess(env_extra):
    env = dict(os.environ, **env_extra)
    out = subprocess.run([sys.executable, "-c", "import opmimo; print(opmimo.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_pure_python_flag_selects_fallback():
    assert _backend_in_subprocess({"OPMIMO_PURE_PYTHON": "1"}) == "python"


def test_default_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert _backend_in_subprocess({}) == kernels.BACKEND


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="extension not built")
@settings(max_examples=40, deadline=None)
@given(K=st.integers(2, 7), T=st.integers(7, 300), scale=st.floats(0.01, 60.0),
       seed=st.integers(0, 2**32 - 1), terminated=st.booleans())
def test_backends_agree(K, T, scale, seed, terminated):
    gens = {2: (0o3, 0o1), 3: (0o5, 0o7), 4: (0o13, 0o17), 5: (0o23, 0o35),
            6: (0o53, 0o75), 7: (0o133, 0o171)}[K]
    tr = trellis(CodeSpec(K, gens))
    llr = np.random.default_rng(seed).normal(0, scale, (T, 2))
    a = _bcjr_py.bcjr_logmap(llr, tr.next_state, tr.outputs, int(terminated))
    b = kernels.bcjr_logmap(llr, tr.next_state, tr.outputs, int(terminated))
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-9 * max(1.0, scale), rtol=0)


def test_frame_results_identical_across_backends():
    script = ("from opmimo.config import SystemConfig, validate, snr_from_ebn0\n"
              "from opmimo.sim import simulate_frame\n"
              "c = SystemConfig(num_antennas=4, num_pic_iterations=2)\n"
              "c = c.replace(snr=snr_from_ebn0(4.0, c))\n"
              "print(simulate_frame(validate(c), 0)[0])\n")
    outs = {}
    for flag in ("", "1"):
        env = dict(os.environ, OPMIMO_PURE_PYTHON=flag)
        outs[flag] = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True,
                                    text=True, check=True).stdout
    assert outs[""] == outs["1"] and "bit_errors" in outs[""]
