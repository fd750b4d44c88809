"""Multitype branching processes with power-law mutation rates.

Exact walk analysis (first-appearance times, neutral counts, weight
polynomials), limiting growth exponents, and an exact stochastic simulator
with ensemble checks against the first-order limits.
"""

__version__ = "0.1.0"
