"""Unit conversions into the internal atomic-unit system (hbar = 1).

Aggregate simulations run in Hartree atomic units: energies in Hartree,
lengths in bohr, time in hbar/Hartree, masses in electron masses. The
three-level model is dimensionless and bypasses this table.
"""

# CODATA 2018
HARTREE_PER_WAVENUMBER = 4.556335252912e-6
BOHR_PER_ANGSTROM = 1.0 / 0.529177210903
AU_TIME_PER_PS = 1.0e-12 / 2.4188843265857e-17
HARTREE_PER_KELVIN = 3.166811563e-6  # Boltzmann constant

CONVERSIONS = {
    "cm-1": HARTREE_PER_WAVENUMBER,
    "angstrom": BOHR_PER_ANGSTROM,
    "1/angstrom": 1.0 / BOHR_PER_ANGSTROM,
    "ps": AU_TIME_PER_PS,
    "kelvin": HARTREE_PER_KELVIN,
}


def wavenumber_to_hartree(x):
    return x * HARTREE_PER_WAVENUMBER


def hartree_to_wavenumber(x):
    return x / HARTREE_PER_WAVENUMBER


def angstrom_to_bohr(x):
    return x * BOHR_PER_ANGSTROM


def bohr_to_angstrom(x):
    return x / BOHR_PER_ANGSTROM


def inv_angstrom_to_inv_bohr(x):
    return x / BOHR_PER_ANGSTROM


def ps_to_au(x):
    return x * AU_TIME_PER_PS


def au_to_ps(x):
    return x / AU_TIME_PER_PS


def kelvin_to_hartree(x):
    return x * HARTREE_PER_KELVIN
