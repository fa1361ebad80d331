"""Hardware-budgeted model selection for edge intrusion detection."""

__version__ = "0.1.0"
