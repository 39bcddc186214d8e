"""edgereg: edge-preserving Tikhonov reconstruction with AMG-preconditioned FGMRES."""
__version__ = "0.1.0"
