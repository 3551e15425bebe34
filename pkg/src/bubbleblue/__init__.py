"""Multihop private Bluetooth bubbles: key-matrix privacy, hello-based
neighbor discovery and CDS-backbone flooding, with the CDS and flooding-cost
analysis tools used to size them."""

__version__ = "0.1.0"
