"""Formalize 2x2 game scenarios as LGDL logic programs, validate them and
run tournaments over them."""

__version__ = "0.1.0"
