import json
import math

import pytest

from distortkit import constructions as cons
from distortkit.constructions import (LacunaritySchedule, bundle, certify_average, flat_block,
                                      make_ak, make_delta, make_dm, make_gamma, make_l1_average,
                                      make_ris, transfer_search, verify_bundle, verify_lp_equivalence)
from distortkit.exceptions import InfeasibleConstructionError, InvalidInputError, NotFoundError
from distortkit.schlumprecht import phi, s_norm
from distortkit.spaces import SpaceParams, calibrate
from distortkit.vectors import SparseVector, lp_norm, pointwise_product


@pytest.fixture(scope="module")
def t2():
    sp = SpaceParams.parse("t2")
    return sp.with_calibration(calibrate(sp, budget=8))


def test_verifier_on_lp_basis_and_single_block():
    l2 = SpaceParams.parse("lp:2")
    basis = [SparseVector.basis(i) for i in range(3)]
    d, D = verify_lp_equivalence(basis, 2.0, 1 / 16, l2)
    assert d == pytest.approx(1, abs=1e-9) and D == pytest.approx(1, abs=1e-9)
    d, D = verify_lp_equivalence([flat_block(0, 5)], 1.0)
    assert d == pytest.approx(1) and D == pytest.approx(1)
    with pytest.raises(InvalidInputError):
        verify_lp_equivalence([], 1.0)


def test_verifier_two_short_flat_blocks_against_fine_grid():
    blocks = [flat_block(0, 2), flat_block(2, 2)]
    cert = verify_lp_equivalence(blocks, 1.0, 1 / 64)
    fine = min(s_norm(blocks[0] * (j / 2000) + blocks[1] * (1 - j / 2000)) for j in range(2001))
    assert cert.d <= 1 and cert.D <= 1 + 1e-12
    assert cert.d_lower <= cert.d <= cert.D
    # the grid minimum is an upper bound for the true minimum, close to the fine one
    assert fine <= cert.d + 1e-12 and cert.d - fine < 1e-3


def test_l1_average_small():
    a = make_l1_average(1, 3)
    assert a.d == pytest.approx(1) and a.u == flat_block(3, 1)
    a = certify_average([SparseVector({0: 0.5, 1: 2.0})])
    assert a.d == pytest.approx(1)
    a = make_l1_average(3, 10)
    assert a.r == 2 and min(a.u.indices) == 10 and max(a.u.indices) == 15
    assert s_norm(a.u) == pytest.approx(1, abs=1e-9)
    assert a.d >= 0.5
    with pytest.raises(InvalidInputError):
        make_l1_average(0)


def test_l1_average_failures():
    with pytest.raises(InfeasibleConstructionError) as err:
        make_l1_average(4, 0, 1)
    assert err.value.measured < 0.5
    # r = n - 2 sits exactly on the boundary d = 1/2 and is accepted
    a = make_l1_average(4, 0, 2)
    assert a.d == pytest.approx(phi(2) / phi(8), abs=1e-12) == pytest.approx(0.5)


def test_ris_examples():
    r = make_ris(1, LacunaritySchedule(1e-9))
    assert r.k == 1
    r = make_ris(2, LacunaritySchedule(0.005, sizes=(4, 8)))
    assert r.sizes == (4, 8)
    assert all(row["pass"] for row in r.certificate)
    with pytest.raises(InfeasibleConstructionError) as err:
        make_ris(2, LacunaritySchedule(1.0))
    assert "36k^2" in err.value.inequality
    with pytest.raises(InfeasibleConstructionError):
        make_ris(2, LacunaritySchedule(0.5, sizes=(4, 8)))
    with pytest.raises(InvalidInputError):
        LacunaritySchedule(0)


def test_ak_examples():
    a1 = make_ak(1, LacunaritySchedule(1e-9))
    assert a1.u == a1.ris.averages[0].u
    a2 = make_ak(2, LacunaritySchedule(0.005, sizes=(4, 8)))
    assert a2.pairing == pytest.approx(1, abs=1e-9)
    assert a2.norm.lower >= 1 - 1e-9
    with pytest.raises(InvalidInputError):
        make_ak(0, LacunaritySchedule(0.1))


def test_dm_examples():
    t = make_dm(1, 4)
    assert float(lp_norm(t.t, 1)) == pytest.approx(1, abs=1e-9)
    t = make_dm(2, 0, 256)
    assert len(t.t) == 512 and t.t.is_nonnegative()
    assert float(lp_norm(t.t, 1)) == pytest.approx(1, abs=1e-9)
    assert max(t.v_vector.values) <= 2


def test_transfer_examples():
    hs = [SparseVector.indicator(range(4 * j, 4 * j + 4), coeff=0.25) for j in range(6)]
    res = transfer_search(hs, 2, 0.1)
    assert res.defect < 0.1
    one = [SparseVector({0: 0.7, 1: 0.3})]
    res = transfer_search(one, 1, 0.5)
    assert res.J == (0,)
    with pytest.raises(NotFoundError):
        transfer_search([SparseVector.basis(3)], 8, 1e-6)


def test_delta_examples(t2):
    l2 = SpaceParams.parse("lp:2")
    for m in range(1, 5):
        c = make_delta(l2, 12, m)
        assert c.defect < 1 / m and c.pairing == pytest.approx(1, abs=1e-9)
    c = make_delta(t2, 2, 1)
    assert float(lp_norm(c.product, 1)) == pytest.approx(1, abs=1e-9)
    assert c.in_range
    with pytest.raises(InvalidInputError):
        make_delta(t2, 0, 1)
    with pytest.raises(InvalidInputError):
        make_delta(SpaceParams.parse("s"), 2, 1)


def test_gamma_examples(t2):
    g1 = make_gamma(t2, 1, (2,))
    assert g1.y.allclose(g1.members[0].z, 1e-15)
    g2 = make_gamma(t2, 2, (2, 3))
    assert float(lp_norm(g2.product, 1)) == pytest.approx(1, abs=1e-9)
    assert g2.pairing == pytest.approx(1, abs=1e-9)
    with pytest.raises(InfeasibleConstructionError):
        make_gamma(t2, 2, (2, 3), LacunaritySchedule(1.0))


@pytest.mark.parametrize("kind", ["average", "ris", "ak", "dm", "delta", "gamma"])
def test_bundles_round_trip(kind, t2):
    obj = {"average": lambda: make_l1_average(2, 0, 8),
           "ris": lambda: make_ris(2, LacunaritySchedule(0.005, sizes=(4, 8))),
           "ak": lambda: make_ak(2, LacunaritySchedule(0.005, sizes=(4, 8))),
           "dm": lambda: make_dm(2, 0, 4),
           "delta": lambda: make_delta(t2, 4, 2),
           "gamma": lambda: make_gamma(t2, 2, (2, 3))}[kind]()
    b = bundle(obj, kind)
    assert all(b["checks"].values())
    ok, fresh = verify_bundle(json.loads(json.dumps(b)))
    assert ok
    # tampering is detected
    if kind == "dm":
        b2 = json.loads(json.dumps(b))
        b2["record"]["t"]["coords"][0][1] *= 2
        ok, fresh = verify_bundle(b2)
        assert not ok
