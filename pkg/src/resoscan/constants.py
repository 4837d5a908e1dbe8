"""Physical constants in the MeV/fm/s unit system used throughout."""

HBARC = 197.327            # MeV fm
E2 = 1.43997               # e^2/(4 pi eps0), MeV fm
HBAR_MEV_S = 6.582119569e-22   # hbar, MeV s
AMU_MEV = 931.494          # atomic mass unit, MeV

# 12C + 12C defaults: mu c^2 = (12*12/24) amu, Z1*Z2 = 36
C12_C12_REDUCED_MASS_MEV = 6.0 * AMU_MEV
C12_C12_CHARGE_PRODUCT = 36.0
