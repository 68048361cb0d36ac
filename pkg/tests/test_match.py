from emprops.descriptors import PATTERN_TABLE
from emprops.molgraph import PatternAtom, PatternBond, SubstructurePattern, match_pattern, parse_smiles

from conftest import RDX, TATB, TNT


def test_nitro_on_tnt():
    assert match_pattern(parse_smiles(TNT), PATTERN_TABLE["nitro"]) == 3


def test_rdx_has_nitramine_not_nitro():
    g = parse_smiles(RDX)
    assert match_pattern(g, PATTERN_TABLE["nitro"]) == 0
    assert match_pattern(g, PATTERN_TABLE["nitramine"]) == 3


def test_no_match_on_methane():
    g = parse_smiles("C")
    for pattern in PATTERN_TABLE.values():
        assert match_pattern(g, pattern) == 0


def test_tatb_amino_and_nitro():
    g = parse_smiles(TATB)
    assert match_pattern(g, PATTERN_TABLE["nitro"]) == 3
    assert match_pattern(g, PATTERN_TABLE["amino_primary"]) == 3


def test_dedup_by_atom_set():
    # both oxygens of a nitro group permute, but the atom set is one match
    g = parse_smiles("C[N+](=O)[O-]")
    assert match_pattern(g, PATTERN_TABLE["nitro"]) == 1


def test_azide():
    assert match_pattern(parse_smiles("CN=[N+]=[N-]"), PATTERN_TABLE["azide"]) == 1
    assert match_pattern(parse_smiles("CN"), PATTERN_TABLE["azide"]) == 0


def test_nitrate_ester_on_petn_like():
    g = parse_smiles("CCO[N+](=O)[O-]")
    assert match_pattern(g, PATTERN_TABLE["nitrate_ester"]) == 1
    assert match_pattern(g, PATTERN_TABLE["nitro"]) == 0


def test_n_oxide_excludes_nitro():
    assert match_pattern(parse_smiles("[O-][n+]1ccccc1"), PATTERN_TABLE["n_oxide"]) == 1
    assert match_pattern(parse_smiles("C[N+](=O)[O-]"), PATTERN_TABLE["n_oxide"]) == 0


def test_carbonyl_and_cyano():
    assert match_pattern(parse_smiles("CC(=O)C"), PATTERN_TABLE["carbonyl"]) == 1
    assert match_pattern(parse_smiles("CC#N"), PATTERN_TABLE["cyano"]) == 1
    assert match_pattern(parse_smiles("CCN"), PATTERN_TABLE["cyano"]) == 0


def test_custom_pattern_with_degree_constraint():
    # terminal carbon: exactly one heavy neighbor
    terminal_c = SubstructurePattern(
        name="terminal_carbon",
        atoms=(PatternAtom(element="C", heavy_degree=1),),
    )
    assert match_pattern(parse_smiles("CCCC"), terminal_c) == 2
    assert match_pattern(parse_smiles("C1CCC1"), terminal_c) == 0


def test_bond_order_constraint():
    double_cc = SubstructurePattern(
        name="cc_double",
        atoms=(PatternAtom(element="C"), PatternAtom(element="C")),
        bonds=(PatternBond(0, 1, "double"),),
    )
    assert match_pattern(parse_smiles("C=CC=C"), double_cc) == 2
    assert match_pattern(parse_smiles("CCCC"), double_cc) == 0
    # aromatic bonds do not satisfy an explicit double-bond constraint
    assert match_pattern(parse_smiles("c1ccccc1"), double_cc) == 0
