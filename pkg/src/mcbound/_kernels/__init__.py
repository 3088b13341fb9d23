"""Hot-loop kernel backend selection.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used.  Set MCBOUND_KERNELS=py or =ext to force a backend (ext
raises if the extension was not built).
"""

import os

from . import _pyfallback

_FORCE = os.environ.get("MCBOUND_KERNELS", "").strip().lower()

if _FORCE == "py":
    _impl = _pyfallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        if _FORCE == "ext":
            raise ImportError(
                "MCBOUND_KERNELS=ext but the compiled extension is not available; "
                "build it with `pip install -e .`"
            ) from None
        _impl = _pyfallback

BACKEND = "py" if _impl is _pyfallback else "ext"

sample_paths = _impl.sample_paths
running_sup_sum = _impl.running_sup_sum


def available_backends():
    """Names of importable backends (for tests and the benchmark)."""
    names = ["py"]
    try:
        from . import _core  # noqa: F401
        names.append("ext")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the backend module by name ('py' or 'ext')."""
    if name == "py":
        return _pyfallback
    if name == "ext":
        from . import _core
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")
