"""Physical constants and default model parameters."""

# Sun gravitational parameter, km^3/s^2 (IAU 2015 nominal value).
MU_SUN_KM3_S2 = 1.32712440018e11

# Standard gravity at Earth's surface, m/s^2.
G0_M_S2 = 9.80665

# Astronomical unit, km.
AU_KM = 1.495978707e8

# Earth-Moon CR3BP characteristic quantities.
EARTH_MOON_MASS_RATIO = 0.0121505856
EARTH_MOON_L_STAR_KM = 3.844e5
EARTH_MOON_T_STAR_S = 375200.0
EARTH_MOON_M_STAR_KG = 6.0458e24

# Gravitational-distance floors below which propagation fails fast instead of
# returning garbage near a primary.
R_FLOOR_TWO_BODY_KM = 1.0
R_FLOOR_CR3BP = 1.0e-9

SECONDS_PER_DAY = 86400.0
SECONDS_PER_HOUR = 3600.0
