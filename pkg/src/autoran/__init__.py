"""Natural-language xApp synthesis pipeline with a simulated near-RT RIC."""

__version__ = "0.1.0"
