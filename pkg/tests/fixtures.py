"""Golden reference data shared across the test suite."""

# Reference O2 bond scan: 12 (bond length, energy) samples from a converged
# electronic-structure sweep, frozen here as golden data.
O2_BOND_LENGTHS = [
    0.7,
    0.7999999999999999,
    0.8999999999999999,
    0.9999999999999999,
    1.0999999999999999,
    1.1999999999999997,
    1.2999999999999998,
    1.4,
    1.4999999999999998,
    1.5999999999999996,
    1.6999999999999997,
    1.7999999999999996,
]

O2_ENERGIES = [
    -145.62788167137018,
    -146.84681171028765,
    -147.4949800447528,
    -147.83009817046496,
    -147.99426355165212,
    -148.0650523094651,
    -148.08420987269093,
    -148.07433587538745,
    -148.04836422105808,
    -148.0143775207076,
    -147.9776738419034,
    -147.9415904217127,
]

# Leading cubic-term coefficient of the not-a-knot fit over the data above.
O2_CUBIC_COEFF_0 = -47.44335906256796

# Scripted energies (Hartree) for the three linear-chain molecules of the
# molecular-design replay.
CHAIN_ENERGY_TABLE = {
    "CCCCCCC": -274.4099422040276,
    "CCCCOCC": -310.22752228780735,
    "CCCCNCC": -290.39936318417176,
}

# Knowledge-graph retrieval fixture: the protein-network sequences restated
# as their underlying distinct triples.
PROTEIN_NETWORK_TRIPLES = [
    ("networks", "display", "strong stress concentration"),
    ("networks", "break at", "low strains"),
    ("networks", "break at", "low stress"),
    ("protein networks", "typically feature", "structural irregularities"),
    ("structural irregularities", "require", "high energetic cost"),
    ("protein networks", "can sustain", "large deformation"),
    ("cells", "undergo", "large deformation"),
    ("alpha-helical protein network", "undergo", "large deformation"),
    ("Alpha-helix based protein networks", "withstand", "large deformation"),
    ("protein networks", "withstand", "large deformation"),
    ("structure", "capable of mitigating", "structural irregularities"),
    ("protein networks", "advance", "understanding about deformability"),
    ("alpha-helical protein motif", "under mechanical deformation", "protein networks"),
]
