"""Single-photon grating diffraction: collapse-delay simulation and coincidence analysis."""

__version__ = "0.1.0"
