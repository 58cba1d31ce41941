"""Shared test helpers: deterministic random fields on small grids.

Also hosts the terminal-summary hook that prints one pass/fail line per
acceptance criterion at the end of a run (the lines are collected by
``tests/test_acceptance.py`` as its criteria finish).
"""

import numpy as np

from boltzkit.spectral_core import PhaseField, SpectralGrid

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_field(grid: SpectralGrid, seed: int, rep: str = "XV") -> PhaseField:
    """Complex Gaussian noise field, deterministic in (grid shape, seed)."""
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(grid.field_shape) + 1j * rng.standard_normal(
        grid.field_shape
    )
    return PhaseField(grid, rep, data)


def gaussian_xv(grid: SpectralGrid, sigma: float) -> PhaseField:
    """x-constant Gaussian exp(-|v|^2 / (2 sigma^2)) in the XV representation."""
    r = grid.radial(grid.v_axis)
    prof = np.exp(-(r**2) / (2.0 * sigma**2))
    data = np.broadcast_to(
        prof.reshape((1,) * grid.d + prof.shape), grid.field_shape
    )
    return PhaseField(grid, "XV", np.array(data, dtype=np.complex128))
