"""Decentralised multi-agent path finding for spatially extended agents."""

try:
    from ._demapf import *  # noqa: F401,F403  (installed package layout)
    from ._demapf import __doc__ as _doc
except ImportError:  # build-tree layout: extension module on PYTHONPATH
    from _demapf import *  # noqa: F401,F403
    from _demapf import __doc__ as _doc

__doc__ = _doc
