"""gNB antenna-panel EIRP synthesis, Type I codebook beam nulling and link-level BER."""

__version__ = "0.1.0"
