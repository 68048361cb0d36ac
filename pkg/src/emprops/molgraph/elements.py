"""Element data for the six supported elements (plus hydrogen).

Values are pinned here so every descriptor is reproducible without a
periodic-table dependency.
"""

from __future__ import annotations

# Heavy elements that may appear as graph atoms.
HEAVY_ELEMENTS = ("C", "N", "O", "F", "Cl")

# Organic-subset SMILES tokens; lowercase spellings mark aromatic atoms.
AROMATIC_TOKENS = {"c": "C", "n": "N", "o": "O"}

# Default (neutral) valences; the effective valence is default + charge.
DEFAULT_VALENCE = {"H": 1, "C": 4, "N": 3, "O": 2, "F": 1, "Cl": 1}

# Outer-shell electron counts used by the electrotopological state.
VALENCE_ELECTRONS = {"C": 4, "N": 5, "O": 6, "F": 7, "Cl": 7}

# Principal quantum number of the valence shell.
PRINCIPAL_QUANTUM = {"C": 2, "N": 2, "O": 2, "F": 2, "Cl": 3}

# Pauling electronegativities.
ELECTRONEGATIVITY = {"H": 2.20, "C": 2.55, "N": 3.04, "O": 3.44, "F": 3.98, "Cl": 3.16}

# Atomic contributions to the van der Waals volume in cubic angstroms,
# from Zhao, Abraham & Zissimos, J. Org. Chem. 68, 7368 (2003).
VDW_ATOM_VOLUME = {"H": 7.24, "C": 20.58, "N": 15.60, "O": 14.71, "F": 13.31, "Cl": 22.45}

# Bond and ring corrections from the same source.
VDW_BOND_CORRECTION = 5.92
VDW_AROMATIC_RING_CORRECTION = 14.7
VDW_NONAROMATIC_RING_CORRECTION = 3.8


def effective_valence(element: str, charge: int) -> int:
    """Target valence for hydrogen filling: default valence plus charge.

    Covers the charge states that occur in energetic-materials SMILES
    (N+ -> 4, O- -> 1, N- -> 2). Exotic carbocation/carbanion charges get
    the same additive rule.
    """
    return DEFAULT_VALENCE[element] + charge
