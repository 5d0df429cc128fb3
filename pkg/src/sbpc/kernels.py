"""Selection of the branch-and-bound search implementation.

The compiled extension ``sbpc._kernel`` is used when it was built; otherwise,
or when ``SBPC_PURE_PYTHON=1`` is set, the pure-Python ``sbpc._fallback``
takes over. Both return identical results.
"""
from __future__ import annotations

import os

from . import _fallback

python_bnb_search = _fallback.bnb_search

try:
    from ._kernel import bnb_search as compiled_bnb_search
except ImportError:  # extension not built
    compiled_bnb_search = None

if compiled_bnb_search is not None and os.environ.get("SBPC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    bnb_search = compiled_bnb_search
    BACKEND = "compiled"
else:
    bnb_search = python_bnb_search
    BACKEND = "python"
