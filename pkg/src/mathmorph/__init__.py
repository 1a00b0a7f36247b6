"""mathmorph: solver-verified mutation and informalization of formal
math problems expressed in an SMT-LIB fragment."""

__version__ = "0.1.0"
