"""Physical constants in the eV / fs / Angstrom unit system (charge e = 1)."""

HBAR = 0.6582119569  # eV fs
C_LIGHT = 2997.92458  # Angstrom / fs


def omega_from_wavelength_nm(lam_nm: float) -> float:
    """Angular frequency (rad/fs) for a vacuum wavelength in nm."""
    import math

    return 2.0 * math.pi * C_LIGHT / (lam_nm * 10.0)
