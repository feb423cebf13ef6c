"""Dual-level retrieval test-bed for instruction-following graph navigation.

The compiled extension carries all functionality; this package just
re-exports it. When running against a plain CMake build tree the extension
sits next to the build outputs instead of inside the package.
"""

try:
    from navpruner._navpruner import *  # noqa: F401,F403
    from navpruner import _navpruner as _ext
except ImportError:  # build-tree layout
    from _navpruner import *  # noqa: F401,F403
    import _navpruner as _ext

__all__ = [name for name in dir(_ext) if not name.startswith("_")]
__version__ = "0.1.0"
