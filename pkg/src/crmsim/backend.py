"""Integration kernel selection.

Two interchangeable kernels exist: a compiled Cython extension
(crmsim._kernel) and a pure-Python fallback (crmsim._kernel_py).  They
implement identical arithmetic and produce bitwise identical traces;
the compiled one is merely fast.  Selection order:

1. explicit argument to get_kernel,
2. the CRMSIM_BACKEND environment variable (auto, compiled, python),
3. auto: compiled if importable, else python.
"""

import os

from .errors import ConfigError

_CHOICES = ("auto", "compiled", "python")


def get_kernel(name=None):
    """Return the kernel module exposing integrate_packed and
    KERNEL_IMPL."""
    if name is None:
        name = os.environ.get("CRMSIM_BACKEND", "auto")
    if name not in _CHOICES:
        raise ConfigError(
            "backend must be one of %r, got %r" % (_CHOICES, name)
        )
    if name == "python":
        from . import _kernel_py
        return _kernel_py
    if name == "compiled":
        try:
            from . import _kernel
        except ImportError as exc:
            raise ConfigError(
                "compiled backend requested but the extension is not "
                "built: %s" % exc
            ) from exc
        return _kernel
    try:
        from . import _kernel
        return _kernel
    except ImportError:
        from . import _kernel_py
        return _kernel_py


def kernel_name(name=None):
    """Implementation tag of the kernel get_kernel would return."""
    return get_kernel(name).KERNEL_IMPL


def available_backends():
    """Names of the kernels importable right now."""
    out = ["python"]
    try:
        from . import _kernel  # noqa: F401
        out.insert(0, "compiled")
    except ImportError:
        pass
    return out
