"""Select the compiled path kernels, or the pure-Python fallback.

Set ``FBMDELAY_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("FBMDELAY_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels
    else:
        BACKEND = "cython"
else:
    _impl = _pykernels

euler_delay = _impl.euler_delay
rk4_delay = _impl.rk4_delay

CONSTANT = _pykernels.CONSTANT
TANH_SINE = _pykernels.TANH_SINE
LOGISTIC = _pykernels.LOGISTIC
LINEAR = _pykernels.LINEAR
