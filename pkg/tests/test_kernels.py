import os
import subprocess
import sys

import numpy as np
import pytest

from holomera import kernels
from holomera._kernels_py import uniform_scalar, uniforms


def test_vectorized_and_scalar_uniforms_agree():
    shots = np.arange(0, 5000, 7)
    for seed, draw in [(0, 0), (123, 5), (2**40 + 3, 99)]:
        vec = uniforms(seed, shots, draw)
        assert np.array_equal(vec, [uniform_scalar(seed, int(s), draw) for s in shots])


def test_uniforms_look_uniform():
    u = uniforms(7, np.arange(200000), 3)
    assert u.min() >= 0 and u.max() < 1
    counts, _ = np.histogram(u, bins=20, range=(0, 1))
    chi2 = np.sum((counts - 10000) ** 2 / 10000)
    assert chi2 < 60  # 19 dof
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.01
    assert not np.array_equal(u, uniforms(7, np.arange(200000), 4))


def test_default_backend():
    assert kernels.BACKEND == ("cython" if kernels.HAVE_EXTENSION else "python") or os.environ.get("HOLOMERA_KERNEL")
    assert kernels.get_backend("python").run_trajectories is not None


@pytest.mark.skipif(not kernels.HAVE_EXTENSION, reason="compiled kernel not built")
def test_environment_forces_fallback():
    env = dict(os.environ, HOLOMERA_KERNEL="python")
    out = subprocess.run([sys.executable, "-c", "from holomera import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
