"""Physical constants and the default experimental parameters."""

import math

C = 299_792_458.0  # m/s, exact SI value

PS_PER_S = 10**12

# 2*sqrt(2 ln 2): Gaussian FWHM -> sigma
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

# Grating and screen
GRATING_LINES_PER_MM = 800.0
PERIOD_P = 1e-3 / GRATING_LINES_PER_MM  # 1.25 um
APERTURE_A = PERIOD_P / 2.0
WAVELENGTH = 800e-9
LINES_ILLUMINATED = 2000
FOCAL_F = 4.0

# Source and detectors
HERALD_RATE = 1e5  # /s, echo-limited ceiling
ECHO_CEILING = 1e5  # /s
PATH_EFFICIENCY = 0.25
DETECTOR_DIAMETER = 5e-3
DETECTOR_EFFICIENCY = 0.7
DARK_RATE = 100.0  # /s
RESOLUTION_FWHM = 2e-9
AFTERPULSE_MEAN_DELAY = 50e-9
DEAD_TIME = 50e-9

# Single-aperture feasibility scenario
SLIT_SPREAD_EXTENT = 3.0

# Rate quoted for detectors at the lateral grating peaks
QUOTED_GRATING_RATE = 2e4
