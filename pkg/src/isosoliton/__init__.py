"""Numerical laboratory for isoperimetric inequalities in steady Ricci solitons.

Modules: ``warp_core`` (warped-product models), ``bryant_builder`` (phase-plane
construction of the Bryant soliton), ``profile`` (isoperimetric profile and
graph functionals), ``flow_engine`` (volume-preserving graph flow),
``experiments`` (inequality checks) and ``cli``.
"""

__version__ = "0.1.0"
