import numpy as np
import pytest

from aqec.fault_tolerance import (
    CZ_PAIRING, Fault, LOGICAL, SYNDROME_TABLE, build_gadget, check_correctable, classify_syndrome,
    completeness_check, fault_cases, inject_and_propagate, ledger, logical_target, n_ec, syndrome_key,
    verify_property,
)
from aqec.code_library import leung_4qubit


def test_logical_states_match_code_library():
    code = leung_4qubit()
    assert np.abs(LOGICAL["0"] - code.basis[:, 0]).max() < 1e-14
    assert np.abs(LOGICAL["1"] - code.basis[:, 1]).max() < 1e-14
    assert abs(np.vdot(LOGICAL["+"], LOGICAL["-"])) < 1e-14


def test_ec_census():
    g = build_gadget("ec_unit")
    assert g.census("part1")["total"] == 14
    assert g.census("part2")["total"] == 28
    c = g.census()
    assert c["total"] == 42
    assert (c["cnot"], c["measZ"], c["measX"], c["prepPlus"], c["rest"]) == (10, 4, 1, 1, 24)


def test_exrec_census():
    assert build_gadget("cz_exrec").census()["total"] == 172


def test_noiseless_ec_is_identity():
    for lab in ("0", "1", "+", "-"):
        branches = inject_and_propagate("ec_unit", lab)
        assert len(branches) == 1
        br = branches[0]
        assert classify_syndrome(br.bits) == "no error or undetected fault"
        assert check_correctable(br, LOGICAL[lab])


@pytest.mark.parametrize("k", range(4))
def test_input_damping_is_diagnosed(k):
    g = build_gadget("ec_unit")
    wire = g.blocks["d"][k]
    names = ["qubit 1 damped", "qubit 2 damped", "qubit 3 damped", "qubit 4 damped"]
    seen = set()
    for br in inject_and_propagate(g, "+", input_errors=((wire, "damp"),)):
        seen.add(classify_syndrome(br.bits))
    assert seen == {names[k]}


def test_every_single_fault_gives_known_syndrome():
    g = build_gadget("ec_unit")
    for f in fault_cases(g):
        for br in inject_and_propagate(g, "0", faults=(f,)):
            key = syndrome_key(br.bits)
            assert key in SYNDROME_TABLE or classify_syndrome(br.bits) == "end computation", (f, key)


def test_kraus_mode_is_trace_preserving():
    g = build_gadget("ec_unit")
    locs = [loc.id for loc in g.locations(representative_only=True)][:3]
    assert abs(completeness_check(g, "+", locs, p=0.2) - 1) < 1e-6


def test_fault_placements_on_two_qubit_gates():
    g = build_gadget("ec_unit")
    cnot = next(loc for loc in g.locations() if loc.kind == "cnot")
    assert Fault(cnot.id, placement="control").wires(cnot) == cnot.wires[:1]
    assert Fault(cnot.id, placement="both").wires(cnot) == cnot.wires
    n2 = sum(loc.kind in ("cnot", "cz") for loc in g.locations())
    assert len(fault_cases(g)) == len(g.locations()) + 2 * n2


def test_cz_target_is_logical_cz():
    zero, one = LOGICAL["0"], LOGICAL["1"]
    t = logical_target("cz_gadget", ("1", "1"))
    assert np.abs(t + np.kron(one, one)).max() < 1e-14
    t = logical_target("cz_gadget", ("0", "1"))
    assert np.abs(t - np.kron(zero, one)).max() < 1e-14
    assert sorted(CZ_PAIRING) == [0, 1, 2, 3]


@pytest.mark.parametrize("gadget,prop", [
    ("ec_unit", "P1"), ("ec_unit", "P2"), ("recovery_R", "P1"), ("memory", "P1"), ("memory", "P2"),
    ("bell_prep", "P3"), ("xbar_meas", "P4"), ("zbar_meas", "P4"), ("logical_x", "P2"), ("logical_x", "P5"),
])
def test_fast_properties(gadget, prop):
    rep = verify_property(gadget, prop)
    assert rep.passed, str(rep)
    assert rep.n_halted == 0


def test_transversal_cnot_is_not_fault_tolerant():
    rep = verify_property("transversal_cnot", "P5")
    assert not rep.passed
    assert rep.counterexample is not None


def test_unknown_property_rejected():
    with pytest.raises(ValueError):
        verify_property("ec_unit", "P5")


def test_ledgers_follow_derivations():
    ec = n_ec()
    assert (ec["parity"].count, ec["cross"].count, ec["N_EC"]) == (54, 80, 134)
    mem = ledger("memory")
    assert mem.entries_consistent()
    assert mem.A == mem.damping_pairs + mem.z_locations
    assert abs(mem.p_th - 1 / mem.A) < 1e-15
    ex = ledger("cz_exrec")
    assert ex.entries_consistent()
    assert ex.damping_pairs == 1880
    with pytest.raises(ValueError):
        ledger("bogus")
