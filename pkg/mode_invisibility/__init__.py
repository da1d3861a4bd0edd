"""Mode invisibility - QND readout of cavity field states with a flying atom."""

__version__ = "0.1.0"
