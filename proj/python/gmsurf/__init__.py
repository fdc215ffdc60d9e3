"""Gaussian molecular surface meshing."""

from ._core import Error, ParseError, check, mesh, oracle, read_off, read_pqr, write_off

__all__ = ["Error", "ParseError", "check", "mesh", "oracle", "read_off", "read_pqr", "write_off"]
