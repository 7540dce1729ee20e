"""Matrix-valued differential forms, superdensity estimation and Maurer-Cartan tools."""

__version__ = "0.1.0"
