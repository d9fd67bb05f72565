import numpy as np
import pytest

from einstein27.optics import GratingSpec, IntensityProfile, ScreenGeometry, screen_profile


@pytest.fixture(scope="session")
def reference_grating():
    return GratingSpec.reference()


@pytest.fixture(scope="session")
def reference_geometry():
    return ScreenGeometry()


@pytest.fixture(scope="session")
def reference_profile(reference_grating, reference_geometry):
    return screen_profile(reference_grating, reference_geometry)


def grid_profile(points, masses, spacing=1e-3, pad=5):
    """Profile on a uniform grid with the given masses at (grid-aligned) points."""
    points = np.asarray(points, dtype=float)
    lo, hi = points.min() - pad * spacing, points.max() + pad * spacing
    n = int(round((hi - lo) / spacing)) + 1
    x = lo + spacing * np.arange(n)
    w = np.zeros(n)
    for p, m in zip(points, masses):
        w[int(round((p - lo) / spacing))] += m
    return IntensityProfile.from_unnormalized(x, w)


ACCEPTANCE_LINES = []


def report_criterion(number, ok, detail):
    """Record and print one acceptance verdict line."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
