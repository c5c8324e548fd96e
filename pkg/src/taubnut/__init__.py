"""Numerical experiments on a-deformed hyperkaehler cones and their gluing.

Submodules: quaternions, cone, deformation, integrator, flows, closed_forms,
twist, probes, quotients, gluing, cli.
"""
__version__ = "0.1.0"
