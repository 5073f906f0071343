"""Kernel dispatch.

The numba backend is used when numba imports cleanly, unless the environment
variable ``LOEWNER_LAB_NUMBA`` is set to ``0``.  Both backends expose the same
functions; ``get_backend(name)`` returns either explicitly (used by tests and
the benchmark).
"""

import os
from types import SimpleNamespace

from . import _numpy

_NAMES = ("compose_tips", "window_tips", "forward_points", "inverse_points",
          "reverse_ode_tips", "holder_lags", "lag_modulus", "trig_increment")

try:  # pragma: no cover - depends on environment
    from . import _numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False


def _ns(mod, name):
    return SimpleNamespace(name=name, **{k: getattr(mod, k) for k in _NAMES})


def get_backend(name=None):
    """Return a namespace of kernels for ``"numba"`` or ``"numpy"``.

    ``None`` picks the default from the environment.
    """
    if name is None:
        flag = os.environ.get("LOEWNER_LAB_NUMBA", "1").strip().lower()
        name = "numba" if (HAVE_NUMBA and flag not in ("0", "false", "no", "off")) else "numpy"
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not installed")
        return _ns(_numba, "numba")
    if name == "numpy":
        return _ns(_numpy, "numpy")
    raise ValueError(f"unknown backend {name!r}")


_active = get_backend()
BACKEND = _active.name


def __getattr__(attr):
    if attr in _NAMES:
        return getattr(_active, attr)
    raise AttributeError(attr)
