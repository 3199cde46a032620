"""Numerical lab for surgered geodesic flows on a genus-two surface.

Modules: ``mobius`` and ``surface`` (hyperbolic geometry), ``census``
(closed geodesics by length), ``surgery`` and ``flow`` (the surgered flow),
``homotopy`` and ``orbits`` (periodic orbits and their classes),
``entropy`` (separated sets), ``suspension`` (symbolic growth for mapping
tori) and ``cli`` (the ``lab`` command).
"""

__version__ = "0.1.0"
