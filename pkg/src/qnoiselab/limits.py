"""Size caps enforced both by the modules and up-front by the harness."""

NAIVE_MAX_N = 9
RYSER_MAX_N = 30
ENUMERATION_CAP = 10**6
DENSITY_MAX_QUBITS = 10
PURE_MAX_QUBITS = 20
FOURIER_MAX_BITS = 20
HERMITE_MAX_DEGREE = 6
