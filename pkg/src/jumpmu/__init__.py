"""Model checking for the epistemic mu-calculus and imperfect-information
ATL over finitely represented infinite trees, via jumping tree automata
and parity games."""

__version__ = "0.1.0"
