"""Default parameters shared by the pipeline and the command line.

All values are overridable where they are used.

==========================  ===============================================
name                        value
==========================  ===============================================
SAMPLE_RATE                 44100 Hz
FIR_TAPS                    380 taps per reflection kernel
ELST                        0.100 s early/late separation
CROSSFADE                   0.002 s linear ramp centred on the separation
SPLICE_WINDOW               0.020 s energy-continuity window
NOISE_LEVEL_DB              65 dB SPL at 1 m
AMBI_ORDER                  17 (horizontal)
RING_SIZE                   36 loudspeakers, 10 degree spacing
RING_RADIUS                 2.4 m
MAX_ORDER                   12 image-source reflections
EVENT_WINDOW                0.30 s of specular arrivals kept
STATION_DIMS                120 x 11 x 5 m shoebox
STATION_T30 / STATION_EDT   measured station decay times per octave band
==========================  ===============================================
"""

OCTAVE_CENTERS = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)
N_BANDS = len(OCTAVE_CENTERS)

SAMPLE_RATE = 44100
FIR_TAPS = 380
ELST = 0.100
CROSSFADE = 0.002
SPLICE_WINDOW = 0.020
NOISE_LEVEL_DB = 65.0
AMBI_ORDER = 17
RING_SIZE = 36
RING_RADIUS = 2.4
MAX_ORDER = 12
EVENT_WINDOW = 0.30
STATION_DIMS = (120.0, 11.0, 5.0)
SOURCE_LEVEL_DB = 65.0

STATION_T30 = (1.73, 2.44, 2.05, 1.71, 1.47, 1.11, 0.65)
STATION_EDT = (1.02, 1.46, 1.42, 1.19, 1.00, 0.80, 0.46)

# dB/m at 20 degC, 50 % RH
AIR_ATTENUATION = (0.0002, 0.0006, 0.002, 0.005, 0.01, 0.03, 0.1)

# octave-band speech importance, normalised on use
SPEECH_WEIGHTS = (0.01, 0.06, 0.17, 0.24, 0.26, 0.21, 0.05)

CLAMP_DB = 99.0

SCENE1_DISTANCE = 1.6
SCENE1_SPACING_DEG = 30.0
SCENE2_DISTANCES = {13: 1.01, 14: 2.53, 15: 4.01, 16: 6.37, 17: 10.1}

P_REF = 20e-6  # Pa
