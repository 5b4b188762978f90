"""Operator-algebra numerics for irreducible topological Markov chains.

Exact symbolic dynamics, groupoid ultrametrics, locally constant function
algebras with their fundamental representation, Schatten-spectrum
certificates and a Fredholm-module lab, behind a scenario-driven CLI.
"""

__version__ = "0.1.0"
