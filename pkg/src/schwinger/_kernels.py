"""Select the Dyson recurrence backend at import.

The compiled extension is preferred; the numpy version is used when the
extension is missing or when ``SCHWINGER_FORCE_PYTHON=1`` is set.
"""

import os

from . import _dyson_py

MODE_STRICT = _dyson_py.MODE_STRICT
MODE_WEIGHTED = _dyson_py.MODE_WEIGHTED
MODE_UNWEIGHTED = _dyson_py.MODE_UNWEIGHTED

try:
    from . import _dyson_kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _dyson_py.dyson_terms}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled.dyson_terms

if _compiled is not None and os.environ.get("SCHWINGER_FORCE_PYTHON") != "1":
    BACKEND = "compiled"
else:
    BACKEND = "python"

dyson_terms = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    """Return the ``dyson_terms`` implementation called ``name``."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}") from None
