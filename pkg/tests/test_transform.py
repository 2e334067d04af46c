"""Frame-triple calculus: conversions, supercharges, shifts, matrix forms."""

import pytest

from susy3fold.diffalg import (
    FrameError,
    as_rde,
    chain_images,
    rde_one,
    substitute_rde,
    w_frame,
    z_frame,
)
from susy3fold.operators import LinearDiffOperator, compose
from susy3fold.transform import (
    EF_in_new_frame,
    FrameTriple,
    chain_quantities,
    cross,
    derivative_conversions,
    direct_conversions,
    formal_triple,
    identity_triple,
    matrix_form_ABC_hat,
    matrix_form_ABC_mid,
    matrix_form_ABC_z,
    plus_sector,
    transformed_supercharge_minus,
    transformed_supercharge_plus,
    triple_from_functions,
    w_vector,
    w_vector_prime,
    w_vector_second,
    zeta0_prime_vector,
    zeta0_vector,
)

OMEGA_NAMES = ("c0", "c1", "c2", "b0", "b1", "b2", "a0", "a1", "a2")


def symbolic_entries(fr):
    names = (("c0", "c1", "c2"), ("b0", "b1", "b2"), ("a0", "a1", "a2"))
    return [[as_rde(fr.sym(n), fr) for n in row] for row in names]


def entry_matrix(fr, **values):
    """3x3 rational matrix with named nonzero entries, rest zero."""
    names = (("c0", "c1", "c2"), ("b0", "b1", "b2"), ("a0", "a1", "a2"))
    return [[as_rde(fr.const(values.get(n, 0)), fr) for n in row] for row in names]


def cubic_triple():
    # phi = (1 + w, w, w^3): nondegenerate, fully concrete
    fr = w_frame()
    w = fr.sym("w")
    return triple_from_functions(fr, 1 + w, w, w**3)


def test_nested_wronskian_factors_through_the_full_one():
    # pair(3,1)' pair(2,1) - pair(3,1) pair(2,1)' == phi1 * wron3,
    # proved on a formal triple, hence for every triple
    t = formal_triple()
    nested = t.w31.derive() * t.w21 - t.w31 * t.w21.derive()
    assert (t.w3121 - nested).is_zero()
    assert t.w3121 == t.phi1 * t.wron3


# ---------------------------------------------------------------------------
# derivative conversions


def test_identity_triple_conversions():
    t = identity_triple()
    conv = derivative_conversions(t)
    fr = t.frame
    assert conv["dz_dw"] == rde_one(fr)
    assert conv["d2z_dw2"].is_zero()
    assert conv["d2f_dw2"] == as_rde(fr.jet("f", 2), fr)


def test_closed_forms_match_direct_differentiation_formal():
    t = formal_triple()
    closed = derivative_conversions(t)
    direct = direct_conversions(t)
    for key in ("dz_dw", "d2z_dw2", "d3z_dw3", "df_dw", "d2f_dw2", "d3f_dw3"):
        assert closed[key] == direct[key], key


def test_closed_forms_match_direct_differentiation_concrete():
    t = cubic_triple()
    closed = derivative_conversions(t)
    direct = direct_conversions(t)
    for key in closed:
        assert closed[key] == direct[key], key


def test_chain_quantities_are_consistent():
    # each z-derivative of f equals the previous one differentiated in w
    # and divided by dz/dw; this certifies the closed Wronskian forms
    t = formal_triple()
    conv = derivative_conversions(t)
    ch = chain_quantities(t)
    dz = conv["dz_dw"]
    assert ch["df_dz"] == conv["df_dw"] / dz
    assert ch["d2f_dz2"] == ch["df_dz"].derive() / dz
    assert ch["d3f_dz3"] == ch["d2f_dz2"].derive() / dz
    assert ch["zdf_minus_f"] == t.new_z() * ch["df_dz"] - t.new_f()


def test_chain_quantities_identity_triple():
    t = identity_triple()
    fr = t.frame
    ch = chain_quantities(t)
    w = as_rde(fr.sym("w"), fr)
    f = [as_rde(fr.jet("f", k), fr) for k in range(4)]
    assert ch["df_dz"] == f[1]
    assert ch["d2f_dz2"] == f[2]
    assert ch["d3f_dz3"] == f[3]
    assert ch["zdf_minus_f"] == w * f[1] - f[0]


# ---------------------------------------------------------------------------
# transformed supercharges


def test_minus_supercharge_annihilates_the_triple():
    t = formal_triple()
    op = transformed_supercharge_minus(t)
    assert op.order == 3
    assert op.scalar_power == 3
    for phi in t.phi:
        assert op.apply(phi).is_zero()


def test_minus_supercharge_identity_form():
    t = identity_triple()
    fr = t.frame
    f2 = as_rde(fr.jet("f", 2), fr)
    f3 = as_rde(fr.jet("f", 3), fr)
    d = LinearDiffOperator.derivative(fr)
    expected = compose(
        d - LinearDiffOperator.multiplication(f3 / f2),
        compose(d, d),
    ).with_prefactor(3)
    assert transformed_supercharge_minus(t) == expected


def test_minus_supercharge_kills_only_the_span():
    t = cubic_triple()
    fr = t.frame
    w = as_rde(fr.sym("w"), fr)
    op = transformed_supercharge_minus(t)
    # inside the span of (1 + w, w, w^3)
    assert op.apply(2 * t.phi1 - 3 * t.phi2 + 5 * t.phi3).is_zero()
    # outside it
    assert not op.apply(w**2).is_zero()
    assert not op.apply(1 / w).is_zero()


def test_plus_supercharge_identity_form():
    t = identity_triple()
    fr = t.frame
    f2 = as_rde(fr.jet("f", 2), fr)
    f3 = as_rde(fr.jet("f", 3), fr)
    d = LinearDiffOperator.derivative(fr)
    expected = (-compose(
        compose(d, d), d + LinearDiffOperator.multiplication(f3 / f2)
    )).with_prefactor(3)
    assert transformed_supercharge_plus(t) == expected
    # the dual-sector gauge factor 1/f'' is annihilated
    assert transformed_supercharge_plus(t).apply(1 / f2).is_zero()


def test_plus_supercharge_annihilates_its_sector():
    t = formal_triple()
    op = transformed_supercharge_plus(t)
    for u in plus_sector(t):
        assert op.apply(u).is_zero()


def test_supercharges_match_expanded_factor_products():
    # the conjugated build must agree with composing the three
    # first-order factors written out with logarithmic coefficients
    t = cubic_triple()
    fr = t.frame
    d = LinearDiffOperator.derivative(fr)
    mult = LinearDiffOperator.multiplication

    def ld(x):
        return x.derive() / x

    lphi, lw21, lnest = ld(t.phi1), ld(t.w21), ld(t.w3121)
    minus = compose(
        d + mult(lphi + lw21 - lnest),
        compose(d + mult(lphi - lw21), d - mult(lphi)),
    ).with_prefactor(3)
    plus = (-compose(
        d + mult(lphi),
        compose(d + mult(lw21 - lphi), d + mult(lnest - lw21 - lphi)),
    )).with_prefactor(3)
    assert transformed_supercharge_minus(t) == minus
    assert transformed_supercharge_plus(t) == plus


def test_plus_sector_concrete():
    t = cubic_triple()
    fr = t.frame
    w = as_rde(fr.sym("w"), fr)
    op = transformed_supercharge_plus(t)
    for u in plus_sector(t):
        assert op.apply(u).is_zero()
    # for this triple the sector is span{1/w, w, w^2}; 1 and w^3 are not in it
    assert not op.apply(rde_one(fr)).is_zero()
    assert not op.apply(w**3).is_zero()


# ---------------------------------------------------------------------------
# gauge-function shifts


def test_shift_brackets_identity_triple():
    t = identity_triple()
    fr = t.frame
    sh = EF_in_new_frame(t)
    assert sh["E_shift"].is_zero()
    assert sh["W_shift"].is_zero()
    f2 = as_rde(fr.jet("f", 2), fr)
    f3 = as_rde(fr.jet("f", 3), fr)
    assert sh["F_expression"] == f3 / f2


def test_f_expression_vanishes_for_quadratic_f():
    fr = w_frame()
    w = fr.sym("w")
    t = triple_from_functions(fr, fr.one(), w, w**2)
    sh = EF_in_new_frame(t)
    assert sh["F_expression"].is_zero()


def test_shift_bookkeeping():
    t = formal_triple()
    sh = EF_in_new_frame(t)
    assert sh["F_shift"] == 3 * sh["W_shift"]
    # E_shift = W_shift - phi1'/phi1
    lphi = t.phi1.derive() / t.phi1
    assert sh["E_shift"] == sh["W_shift"] - lphi


# ---------------------------------------------------------------------------
# structure vectors


def test_wronskian_vectors_are_cross_products():
    t = formal_triple()
    d1 = tuple(p.derive() for p in t.phi)
    d2 = tuple(p.derive() for p in d1)
    assert w_vector(t) == cross(t.phi, d1)
    assert w_vector_prime(t) == cross(t.phi, d2)
    assert w_vector_second(t) == cross(d1, d2)


def test_zeta0_derivative():
    zfr = z_frame()
    z0 = zeta0_vector(zfr)
    assert tuple(v.derive() for v in z0) == zeta0_prime_vector(zfr)


def test_degenerate_triples_rejected():
    fr = w_frame()
    w = fr.sym("w")
    with pytest.raises(FrameError):
        triple_from_functions(fr, fr.one(), fr.const(3), w)  # W(2,1) = 0
    with pytest.raises(FrameError):
        triple_from_functions(fr, fr.one(), w, w)  # nested Wronskian = 0


# ---------------------------------------------------------------------------
# matrix forms


def test_matrix_form_z_zero_matrix():
    zfr = z_frame(constants=OMEGA_NAMES)
    af, b, c = matrix_form_ABC_z(entry_matrix(zfr), zfr)
    assert af.is_zero() and b.is_zero() and c.is_zero()


def test_matrix_form_z_single_corner_entry():
    zfr = z_frame(constants=OMEGA_NAMES)
    af, b, c = matrix_form_ABC_z(entry_matrix(zfr, c2=1), zfr)
    z = as_rde(zfr.sym("z"), zfr)
    f0 = as_rde(zfr.jet("f", 0), zfr)
    f1 = as_rde(zfr.jet("f", 1), zfr)
    assert af == z * f0 * f1 - f0**2
    assert b == -z * f0
    assert c == f0


def test_matrix_form_z_inhomogeneous_entry():
    zfr = z_frame(constants=OMEGA_NAMES)
    af, b, c = matrix_form_ABC_z(entry_matrix(zfr, a0=1), zfr)
    assert af == rde_one(zfr)
    assert b.is_zero()
    assert c.is_zero()


def test_mid_route_is_the_substituted_z_route():
    # push the z-space contractions through z = phi2/phi1, f = phi3/phi1
    # and compare with the Wronskian-vector forms, all entries symbolic
    zfr = z_frame(constants=OMEGA_NAMES)
    t = formal_triple(constants=OMEGA_NAMES)
    entries_z = symbolic_entries(zfr)
    entries_w = symbolic_entries(t.frame)
    af_z, b_z, c_z = matrix_form_ABC_z(entries_z, zfr)
    dz = derivative_conversions(t)["dz_dw"]
    images = chain_images("f", t.new_f(), dz, 1, extra={("z", 0): t.new_z()})
    af_m, b_m, c_m = matrix_form_ABC_mid(entries_w, t)
    assert substitute_rde(af_z, images) == af_m
    assert substitute_rde(b_z, images) == b_m
    assert substitute_rde(c_z, images) == c_m


def test_hat_route_matches_rescaling_of_mid_route():
    # the transformed quadratic data must be the mid-route data pushed
    # through the rescaling rules of the change of frame
    t = formal_triple(constants=OMEGA_NAMES)
    entries = symbolic_entries(t.frame)
    af_m, b_m, c_m = matrix_form_ABC_mid(entries, t)
    a_h, b_h, c_h = matrix_form_ABC_hat(entries, t)
    f2_chain = chain_quantities(t)["d2f_dz2"]
    a_mid = af_m / f2_chain  # the untransformed leading coefficient
    p1, w21 = t.phi1, t.w21
    assert a_h == a_mid * p1**4 / w21**2
    assert b_h == b_m * p1**2 / w21 - a_mid * w21.derive() * p1**4 / w21**3
    assert c_h == c_m - b_m * p1 * p1.derive() / w21 + a_mid * t.w2d1d * p1**4 / w21**3


def test_hat_route_identity_triple():
    t = identity_triple(constants=OMEGA_NAMES)
    entries = symbolic_entries(t.frame)
    af_m, b_m, c_m = matrix_form_ABC_mid(entries, t)
    a_h, b_h, c_h = matrix_form_ABC_hat(entries, t)
    f2 = as_rde(t.frame.jet("f", 2), t.frame)
    assert a_h == af_m / f2
    assert b_h == b_m
    assert c_h == c_m
