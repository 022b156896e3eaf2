"""adiakit: numerical toolkit for the adiabatic theorem of open quantum systems."""

__version__ = "1.0.0"
