"""Three-phase unbalanced power flow and optimal power flow for distribution feeders."""

__version__ = "0.1.0"
