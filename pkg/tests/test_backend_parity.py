"""Bitwise agreement between the compiled kernel and the pure-Python
fallback.  Every assertion is exact equality: both kernels evaluate the
same frozen arithmetic, so any drift is a bug, not roundoff."""

import numpy as np
import pytest

from conftest import builtin_trace, diverging_scenario, pinned_scenario
from crmsim import backend, studies
from crmsim.errors import ConfigError
from crmsim.sim import integrate

HAVE_COMPILED = "compiled" in backend.available_backends()

pytestmark = pytest.mark.skipif(
    not HAVE_COMPILED, reason="compiled kernel not built")

FIELDS = ("t", "x", "x_true", "x_m", "theta", "u", "r", "d", "noise",
          "deriv_x", "deriv_theta", "x_m_o", "aux", "theta_hat",
          "deriv_theta_hat")


def assert_traces_identical(a, b):
    assert a.status == b.status
    assert a.repairs == b.repairs
    assert len(a.t) == len(b.t)
    for name in FIELDS:
        va, vb = getattr(a, name), getattr(b, name)
        if va is None or vb is None:
            assert va is None and vb is None, name
            continue
        assert np.array_equal(va, vb), "field %s differs" % name


@pytest.mark.parametrize("name", sorted(studies.BUILTINS))
def test_builtin_parity(name):
    assert_traces_identical(builtin_trace(name, "compiled"),
                            builtin_trace(name, "python"))


def test_parity_under_divergence():
    scn = diverging_scenario()
    a = integrate(scn, backend_name="compiled", raise_on_divergence=False)
    b = integrate(scn, backend_name="python", raise_on_divergence=False)
    assert a.status == 1
    assert_traces_identical(a, b)


def test_parity_under_projection_repairs():
    scn = pinned_scenario()
    a = integrate(scn, backend_name="compiled")
    b = integrate(scn, backend_name="python")
    assert a.repairs > 0
    assert_traces_identical(a, b)


def test_backend_selection_and_reporting(monkeypatch):
    assert backend.get_kernel("python").KERNEL_IMPL == "python"
    assert backend.get_kernel("compiled").KERNEL_IMPL == "compiled"
    # default resolution prefers the compiled kernel when importable
    monkeypatch.delenv("CRMSIM_BACKEND", raising=False)
    assert backend.get_kernel(None).KERNEL_IMPL == "compiled"
    monkeypatch.setenv("CRMSIM_BACKEND", "python")
    assert backend.kernel_name() == "python"
    with pytest.raises(ConfigError):
        backend.get_kernel("fortran")
