"""optevo: evolutionary search over graph-encoded gradient-descent optimizers."""

__version__ = "0.1.0"
