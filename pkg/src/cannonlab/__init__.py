"""cannonlab: geodesic automata, transfer operators and orbital counting
for hyperbolic group families."""

__version__ = "0.1.0"
