"""Select the tree-splitter backend at import time.

The compiled Cython kernel is preferred; the pure numpy twin is used when
the extension is unavailable or PATHLENS_PURE_PYTHON is set. Both produce
bit-identical trees.
"""

import os

if os.environ.get("PATHLENS_PURE_PYTHON"):
    from . import _splitter_py as splitter
else:
    try:
        from . import _splitter as splitter  # type: ignore[attr-defined]
    except ImportError:
        from . import _splitter_py as splitter

BACKEND = splitter.BACKEND
grow_tree = splitter.grow_tree
