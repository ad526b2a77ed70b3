"""Kernel backend selection.

The compiled extension is used when it imports; set ``GFNUQ_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels as python_backend

HERMITE = python_backend.HERMITE
LEGENDRE = python_backend.LEGENDRE

compiled_backend = None
if os.environ.get("GFNUQ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

basis_table = backend.basis_table
design_matrix = backend.design_matrix
wasserstein1 = backend.wasserstein1
