"""Backend selection for the AES/CCM kernels.

The compiled extension is preferred; the pure-Python module is the
fallback.  Set SFSIM_PURE_CCM=1 to force the pure backend (used by the
parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _pyccm

if os.environ.get("SFSIM_PURE_CCM"):
    impl = _pyccm
else:
    try:
        from . import _ccmcore as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _pyccm

BACKEND_NAME: str = impl.NAME


def available_backends():
    """All importable backends, compiled first."""
    backends = []
    try:
        from . import _ccmcore

        backends.append(_ccmcore)
    except ImportError:
        pass
    backends.append(_pyccm)
    return backends
