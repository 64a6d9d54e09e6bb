"""Locally optimized reweighted belief propagation for finite-length LDPC codes."""

from lowbp.code_model import (
    CodeParams,
    DegreeProfile,
    FactorGraph,
    ParityCheckMatrix,
    girth,
    load_alist,
    peg_construct,
    save_alist,
)
from lowbp.decoder import DecodeResult, decode, f_boxplus, syndrome

__all__ = [
    "CodeParams",
    "DegreeProfile",
    "FactorGraph",
    "ParityCheckMatrix",
    "girth",
    "load_alist",
    "peg_construct",
    "save_alist",
    "DecodeResult",
    "decode",
    "f_boxplus",
    "syndrome",
]
