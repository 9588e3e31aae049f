"""Approximate quantum error correction for amplitude damping: channels, Petz
recovery, Cartan-parameterized encoding search, spin-chain transfer and
fault-tolerance gadget verification."""

__version__ = "0.1.0"
