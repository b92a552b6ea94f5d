"""Backend selection for the radial marginal kernels.

The compiled extension is used when it imports; set ``PREDKL_PURE_PYTHON=1``
to force the numpy implementation. Generic (callable) priors always run on
the numpy path.
"""

import os

from . import _kernels_py

BACKEND = "python"
_compiled = None
if os.environ.get("PREDKL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        BACKEND = "cython"

_impl = _compiled if _compiled is not None else _kernels_py

log_angular_scaled = _impl.log_angular_scaled
angular_pair_scaled = _impl.angular_pair_scaled
radial_moments_coded = _impl.radial_moments_coded
radial_moments = _kernels_py.radial_moments
log_sphere_area = _kernels_py.log_sphere_area

UNIFORM = _kernels_py.UNIFORM
POWER = _kernels_py.POWER
GAUSSIAN = _kernels_py.GAUSSIAN


def backends():
    """Mapping of available backend name -> module (for benchmarks/tests)."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
