"""Systems from a parameter matrix: construction, preservation, gauge data."""

import random
from fractions import Fraction

import pytest

from susy3fold.diffalg import as_rde, rde_one, w_frame, z_frame
from susy3fold.operators import LinearDiffOperator, compose
from susy3fold.transform import triple_from_functions
from susy3fold.typeb import (
    DegenerateSystemError,
    OmegaMatrix,
    build_system,
    condition_residuals,
    factor_shift_brackets,
    factor_shifts,
    free_qspace_functions,
    hamiltonian_pair,
    intertwining_residual,
    invariants,
    potential_from_invariants,
    potentials,
    preservation_residuals,
    qspace_functions,
    supercharge_factored,
    supercharge_from_invariants,
    verify_conditions,
    verify_intertwining,
    verify_intertwining_shape,
    verify_preservation,
    verify_sectors,
)

ZF = z_frame()
Z = as_rde(ZF.sym("z"), ZF)

FSPECS = (None, Z * Z, Z * Z * Z, Z * Z * Z + Z * Z, Z * Z * Z * Z - Z)

C1_ONLY = OmegaMatrix(((0, 1, 0), (0, 0, 0), (0, 0, 0)))


def c_row(entries, frame, z, f):
    row = entries[0]
    return row[0] + row[1] * z + row[2] * f


# -- parameter matrix ------------------------------------------------------


def test_omega_validation():
    with pytest.raises(ValueError):
        OmegaMatrix(((1, 2), (3, 4)))
    with pytest.raises(TypeError):
        OmegaMatrix(((0.5, 0, 0), (0, 0, 0), (0, 0, 0)))
    om = OmegaMatrix(((1, Fraction(1, 2), "a2"),) + ((0, 0, 0),) * 2)
    assert om.rows[0] == (Fraction(1), Fraction(1, 2), "a2")
    with pytest.raises(AttributeError):
        om.rows = ()


def test_omega_constructors():
    assert OmegaMatrix.zeros() == OmegaMatrix(((0,) * 3,) * 3)
    assert OmegaMatrix.identity() == OmegaMatrix.diagonal(1, 1, 1)
    sym = OmegaMatrix.symbolic()
    assert sym.is_symbolic()
    assert len(sym.symbols) == 9
    # one shared symbol is reported once
    om = OmegaMatrix((("t", "t", 0), (0, 0, 0), (0, 0, 0)))
    assert om.symbols == ("t",)
    rng = random.Random(5)
    a = OmegaMatrix.random_integer(rng)
    assert not a.is_symbolic()
    assert a == OmegaMatrix.random_integer(random.Random(5))


def test_degenerate_fspec_rejected():
    # anything with f'' = 0 cannot span a 3-space together with 1 and z
    for bad in (Z + 1, Fraction(3, 2), 0):
        with pytest.raises(DegenerateSystemError):
            build_system(C1_ONLY, bad)
    wf = w_frame()
    with pytest.raises(ValueError):
        build_system(C1_ONLY, as_rde(wf.sym("w"), wf) ** 2)


# -- construction oracles --------------------------------------------------


def test_zero_matrix_gives_zero_operator():
    sys = build_system(OmegaMatrix.zeros())
    assert sys.hamiltonian.is_zero()
    assert verify_preservation(sys)
    assert verify_sectors(sys)


def test_c1_only_coefficients_formal_f():
    sys = build_system(C1_ONLY)
    fr = sys.frame
    z = as_rde(fr.sym("z"), fr)
    f0, f1, f2, _ = sys.f
    assert (sys.C - z).is_zero()
    assert (sys.B + z * z).is_zero()
    assert (sys.A - (z * z * f1 - z * f0) / f2).is_zero()


def test_symbolic_matrix_coefficients_match_hand_expansion():
    sys = build_system(OmegaMatrix.symbolic())
    fr = sys.frame
    z = as_rde(fr.sym("z"), fr)
    f0, f1, f2, _ = sys.f
    c0, c1, c2, b0, b1, b2, a0, a1, a2 = (
        as_rde(fr.sym(n), fr)
        for n in ("c0", "c1", "c2", "b0", "b1", "b2", "a0", "a1", "a2")
    )
    row_c = c0 + c1 * z + c2 * f0
    row_b = b0 + b1 * z + b2 * f0
    row_a = a0 + a1 * z + a2 * f0
    assert (sys.C - row_c).is_zero()
    assert (sys.B + z * row_c - row_b).is_zero()
    assert (sys.A - ((z * f1 - f0) * row_c - f1 * row_b + row_a) / f2).is_zero()
    assert (sys.Q - sys.B - sys.A.derive() * Fraction(1, 2)).is_zero()


def test_identity_matrix_cubic_f_acts_as_minus_one():
    # the span (1, z, z^3) is an eigenspace: the operator is -1 on it
    sys = build_system(OmegaMatrix.identity(), Z * Z * Z)
    assert sys.A.is_zero()
    assert sys.B.is_zero()
    for u in sys.minus_sector:
        assert (sys.hamiltonian.apply(u) + u).is_zero()


# -- preservation and sectors ----------------------------------------------


def test_preservation_random_instances():
    rng = random.Random(701)
    for _ in range(6):
        om = OmegaMatrix.random_integer(rng)
        for fspec in FSPECS:
            sys = build_system(om, fspec)
            assert verify_preservation(sys), (om, fspec)
            assert verify_sectors(sys), (om, fspec)


def test_preservation_symbolic_matrix_formal_f():
    sys = build_system(OmegaMatrix.symbolic())
    assert verify_preservation(sys)
    assert verify_sectors(sys)


def test_preservation_rejects_tampered_leading_coefficient():
    sys = build_system(OmegaMatrix.random_integer(random.Random(7)), Z * Z * Z + Z)
    entries = sys.omega.entries_over(sys.frame)
    bad = LinearDiffOperator((-sys.C, -sys.B, -(sys.A + 1)))
    res = preservation_residuals(bad, sys.minus_sector, entries)
    # 1 and z have no second derivative; f picks up exactly -f''
    assert res[0].is_zero() and res[1].is_zero()
    assert (res[2] + sys.f[2]).is_zero()


def test_sector_negative_controls():
    sys = build_system(C1_ONLY, Z * Z * Z)
    fr = sys.frame
    z = as_rde(fr.sym("z"), fr)
    assert not sys.supercharge_minus.apply(z * z).is_zero()
    # the plus sector for f = z^3 is span{1/z, z, z^2}; 1 lies outside
    assert not sys.supercharge_plus.apply(as_rde(fr.one(), fr)).is_zero()


def test_plus_sector_members():
    sys = build_system(OmegaMatrix.random_integer(random.Random(31)), Z * Z * Z)
    fr = sys.frame
    z = as_rde(fr.sym("z"), fr)
    f0, f1, f2, _ = sys.f
    want = (1 / f2, f1 / f2, (z * f1 - f0) / f2)
    for got, ref in zip(sys.plus_sector, want):
        assert (got - ref).is_zero()


# -- gauge functions of the physical picture --------------------------------


def test_qspace_functions_quadratic_f():
    sys = build_system(C1_ONLY, Z * Z)
    qs = qspace_functions(sys)
    fr = sys.frame
    z = as_rde(fr.sym("z"), fr)
    assert (qs.E.two_a - z * z * z).is_zero()
    # E = (3/2z) z', W = (1/4z) z', F = 0
    assert qs.E.even.is_zero() and (qs.E.odd - 3 / (2 * z)).is_zero()
    assert qs.W.even.is_zero() and (qs.W.odd - 1 / (4 * z)).is_zero()
    assert qs.F.is_zero()


def test_qspace_needs_nonzero_leading_coefficient():
    for om in (OmegaMatrix.zeros(), OmegaMatrix.identity()):
        sys = build_system(om, Z * Z * Z)
        with pytest.raises(DegenerateSystemError):
            qspace_functions(sys)


def test_pure_constant_row_gives_free_particle():
    om = OmegaMatrix(((0, 0, 0), (0, 0, 0), (1, 0, 0)))
    qs = qspace_functions(build_system(om, Z * Z))
    assert qs.E.is_zero() and qs.W.is_zero() and qs.F.is_zero()
    v = potentials(*qs.unpack())
    assert v["plus"].is_zero() and v["minus"].is_zero()


def test_potential_pair_skew_part():
    E, W, F = free_qspace_functions().unpack()
    v = potentials(E, W, F)
    skew = 3 * W.derive() - F.derive()
    assert (v["plus"] - v["minus"] - skew).is_zero()
    zero = E - E
    v0 = potentials(E, W, zero)
    base = W * W * Fraction(1, 2) - (2 * E.derive() - E * E) * Fraction(1, 3)
    assert (v0["plus"] - base - W.derive() * Fraction(3, 2)).is_zero()


# -- the two differential constraints ---------------------------------------


def test_condition_residuals_vanish_on_systems():
    rng = random.Random(1201)
    for _ in range(4):
        om = OmegaMatrix.random_integer(rng)
        sys = build_system(om, Z * Z * Z + Z)
        try:
            qspace_functions(sys)
        except DegenerateSystemError:
            continue
        assert verify_conditions(sys), om


def test_condition_residuals_vanish_for_formal_f():
    # a formal f needs jets of it up to order 7 inside the residuals
    sys = build_system(OmegaMatrix.random_integer(random.Random(11)), budget=8)
    assert verify_conditions(sys)


def test_condition_residuals_are_genuine_constraints():
    E, W, F = free_qspace_functions().unpack()
    res = condition_residuals(E, W, F)
    assert not res["second_order"].is_zero()
    assert not res["third_order"].is_zero()
    zero = E - E
    trivial = condition_residuals(zero, zero, zero)
    assert trivial["second_order"].is_zero()
    assert trivial["third_order"].is_zero()


# -- invariants and reconstructions ------------------------------------------


def test_invariants_special_cases():
    E, W, F = free_qspace_functions().unpack()
    zero = E - E
    i1, i2, i3 = invariants(E, W, zero)
    assert (i1 - W).is_zero()
    assert (i2 - 2 * E.derive() + E * E).is_zero()
    assert i3.is_zero()
    i1, i2, i3 = invariants(zero, zero, F)
    dF = F.derive()
    want = dF.derive() - 2 * F * dF + F * F * F * Fraction(4, 9)
    assert (i3 - want).is_zero()
    assert all(x.is_zero() for x in invariants(zero, zero, zero))


def test_supercharge_reconstruction_from_invariants():
    E, W, F = free_qspace_functions().unpack()
    rebuilt = supercharge_from_invariants(*invariants(E, W, F))
    assert (rebuilt - supercharge_factored(E, W, F)).is_zero()


def test_potential_reconstruction_from_invariants():
    E, W, F = free_qspace_functions().unpack()
    i1, i2, _ = invariants(E, W, F)
    direct = potentials(E, W, F)
    rebuilt = potential_from_invariants(i1, i2)
    for key in ("plus", "minus"):
        assert (rebuilt[key] - direct[key]).is_zero()


def test_zero_invariants_reconstruct_trivial_data():
    fr = free_qspace_functions().E.frame
    zero = as_rde(fr.zero(), fr)
    p = supercharge_from_invariants(zero, zero, zero)
    assert (p - LinearDiffOperator.derivative(fr, 3)).is_zero()
    v = potential_from_invariants(zero, zero)
    assert v["plus"].is_zero() and v["minus"].is_zero()


# -- intertwining -------------------------------------------------------------


def test_intertwining_residual_shape_free_jets():
    # two constraints survive as the order-1 and order-0 coefficients;
    # everything above cancels once the potentials are fixed
    E, W, F = free_qspace_functions().unpack()
    res = intertwining_residual(E, W, F)
    assert res.order == 1
    r2 = condition_residuals(E, W, F)["second_order"]
    assert (res.coefficient(1) + 2 * r2).is_zero()
    assert verify_intertwining_shape(E, W, F)


def test_intertwining_vanishes_on_systems():
    rng = random.Random(88)
    seen = 0
    while seen < 2:
        om = OmegaMatrix.random_integer(rng)
        sys = build_system(om, Z * Z * Z + Z)
        try:
            qs = qspace_functions(sys)
        except DegenerateSystemError:
            continue
        seen += 1
        assert verify_intertwining(sys)
        assert verify_intertwining_shape(*qs.unpack())


def test_hamiltonian_pair_layout():
    E, W, F = free_qspace_functions().unpack()
    h = hamiltonian_pair(E, W, F)
    v = potentials(E, W, F)
    for key in ("plus", "minus"):
        op = h[key]
        assert op.order == 2
        assert (op.coefficient(2) + Fraction(1, 2) * rde_one(E.frame)).is_zero()
        assert op.coefficient(1).is_zero()
        assert (op.coefficient(0) - v[key]).is_zero()


# -- factor shifts under a change of frame -----------------------------------


def test_factor_shifts_identity_frame():
    fr = w_frame()
    w = as_rde(fr.sym("w"), fr)
    t = triple_from_functions(fr, as_rde(fr.one(), fr), w, as_rde(fr.jet("f"), fr))
    assert all(s.is_zero() for s in factor_shifts(t))


def test_factor_shifts_telescope():
    fr = w_frame()
    w = as_rde(fr.sym("w"), fr)
    one = as_rde(fr.one(), fr)
    f = as_rde(fr.jet("f"), fr)
    t = triple_from_functions(fr, one + 2 * w, w - 1, f + w * w)
    shifts = factor_shifts(t)
    assert any(not s.is_zero() for s in shifts)
    assert (shifts[0] + shifts[1] + shifts[2]).is_zero()
    # each shift is its w-frame bracket times dw/dq
    brackets = factor_shift_brackets(t)
    qfr = shifts[0].frame
    dw = as_rde(qfr.jet("w", 1), qfr)
    for s, b in zip(shifts, brackets):
        assert (s - b.reframe(qfr) * dw).is_zero()


def test_factor_shift_vanishes_on_pair_subgroup():
    # when the pair Wronskian equals the first function the middle
    # factor keeps its form under the frame change
    fr = w_frame()
    w = as_rde(fr.sym("w"), fr)
    phi1 = (1 + w) * (1 + w)
    phi2 = (2 * w + 1) * (1 + w)
    t = triple_from_functions(fr, phi1, phi2, w * w * w)
    assert (t.w21 - phi1).is_zero()
    shifts = factor_shifts(t)
    assert shifts[1].is_zero()
    assert not shifts[0].is_zero()
    assert (shifts[0] + shifts[2]).is_zero()
