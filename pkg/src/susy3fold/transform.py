"""Change-of-frame calculus for a three-dimensional function space.

A frame triple (phi1, phi2, phi3) of functions of w replaces the
original coordinates through z = phi2/phi1 and f = phi3/phi1.  This
module carries the Wronskian bookkeeping for such triples: derivative
conversion between the two bases, the chain forms of f and its
z-derivatives, the factored third-order annihilators of the old and new
three-dimensional spaces, the shifts picked up by the gauge functions,
and the matrix forms of the quadratic Hamiltonian data (A f'', B, C)
against a 3x3 parameter matrix.

Triples may be *formal* (phi_i free jet towers, giving genuine
identities in a differential polynomial ring) or *concrete* (phi_i
explicit rational expressions, e.g. a matrix acting on (1, w, f(w))).
"""

from __future__ import annotations

from .diffalg import (
    FrameError,
    RDE,
    as_rde,
    rde_one,
    rde_zero,
    w_frame,
)
from .operators import LinearDiffOperator, compose


def logd(x):
    """Logarithmic derivative x'/x."""
    if x.is_zero():
        raise ZeroDivisionError("logarithmic derivative of zero")
    return x.derive() / x


def cross(u, v):
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )


def dot_matrix(left, entries, right):
    """left^T . entries . right for 3-vectors of scalars."""
    total = None
    for i in range(3):
        if left[i].is_zero():
            continue
        row = entries[i]
        for j in range(3):
            term = left[i] * row[j] * right[j]
            total = term if total is None else total + term
    if total is None:
        return left[0] - left[0]
    return total


class FrameTriple:
    """Three functions of w spanning the image of <1, z, f>.

    All first- and second-kind Wronskians are computed eagerly:

        pair(i, j)        = phi_i' phi_j  - phi_i phi_j'
        pair_d(i, j)      = phi_i'' phi_j' - phi_i' phi_j''
        wron3             = three-by-three Wronskian of the triple
        w3121             = pair(3,1)' pair(2,1) - pair(3,1) pair(2,1)'

    The nested Wronskian is stored in its factored form
    w3121 = phi1 * wron3 (the two agree identically; a test pins this
    down on a formal triple) so that downstream cancellations against
    phi1 and wron3 stay cheap.

    Degenerate triples (vanishing pair(2,1) or nested Wronskian: the
    change of variable or the new f would collapse) are rejected.
    """

    __slots__ = ("frame", "phi", "w21", "w31", "w32", "wron3", "w3121",
                 "w2d1d", "w3d1d", "w3d2d")

    def __init__(self, phi1, phi2, phi3):
        frame = phi1.frame
        if phi2.frame != frame or phi3.frame != frame:
            raise FrameError("frame functions live in different frames")
        phi = (phi1, phi2, phi3)
        d1 = [p.derive() for p in phi]
        d2 = [p.derive() for p in d1]

        def pair(i, j):
            return d1[i - 1] * phi[j - 1] - phi[i - 1] * d1[j - 1]

        def pair_d(i, j):
            return d2[i - 1] * d1[j - 1] - d1[i - 1] * d2[j - 1]

        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "w21", pair(2, 1))
        object.__setattr__(self, "w31", pair(3, 1))
        object.__setattr__(self, "w32", pair(3, 2))
        object.__setattr__(self, "w2d1d", pair_d(2, 1))
        object.__setattr__(self, "w3d1d", pair_d(3, 1))
        object.__setattr__(self, "w3d2d", pair_d(3, 2))
        wron3 = (
            phi[0] * self.w3d2d
            - d1[0] * (d2[2] * phi[1] - phi[2] * d2[1])
            + d2[0] * self.w32
        )
        object.__setattr__(self, "wron3", wron3)
        object.__setattr__(self, "w3121", phi[0] * wron3)
        if self.w21.is_zero():
            raise FrameError("degenerate triple: the Wronskian of (phi2, phi1) vanishes")
        if self.w3121.is_zero():
            raise FrameError("degenerate triple: the nested Wronskian W(31,21) vanishes")

    def __setattr__(self, *_):
        raise AttributeError("FrameTriple is immutable")

    @property
    def phi1(self):
        return self.phi[0]

    @property
    def phi2(self):
        return self.phi[1]

    @property
    def phi3(self):
        return self.phi[2]

    def new_z(self):
        return self.phi2 / self.phi1

    def new_f(self):
        return self.phi3 / self.phi1

    def __repr__(self):
        return f"FrameTriple(frame={self.frame.label!r})"


def formal_triple(constants=(), budget=None):
    """Triple with free jet towers phi1, phi2, phi3 of w."""
    kw = {"formal_phi": True, "constants": tuple(constants)}
    if budget is not None:
        kw["budget"] = budget
    fr = w_frame(**kw)
    return FrameTriple(
        as_rde(fr.sym("phi1"), fr),
        as_rde(fr.sym("phi2"), fr),
        as_rde(fr.sym("phi3"), fr),
    )


def identity_triple(constants=(), budget=None):
    """The trivial change of frame (1, w, f(w))."""
    kw = {"constants": tuple(constants)}
    if budget is not None:
        kw["budget"] = budget
    fr = w_frame(**kw)
    return FrameTriple(
        rde_one(fr),
        as_rde(fr.sym("w"), fr),
        as_rde(fr.jet("f", 0), fr),
    )


def triple_from_functions(fr, phi1, phi2, phi3):
    return FrameTriple(as_rde(phi1, fr), as_rde(phi2, fr), as_rde(phi3, fr))


# ---------------------------------------------------------------------------
# Derivative conversion between the z- and w-pictures.


def direct_conversions(triple, depth=3):
    """Oracle route: differentiate z = phi2/phi1 and f = phi3/phi1
    directly and divide out dz/dw at each step."""
    z = triple.new_z()
    f = triple.new_f()
    dz = z.derive()
    out = {"dz_dw": dz, "df_dw": f.derive()}
    cur = out["dz_dw"]
    for k in range(2, depth + 1):
        cur = cur.derive()
        out[f"d{k}z_dw{k}"] = cur
    cur = out["df_dw"]
    for k in range(2, depth + 1):
        cur = cur.derive()
        out[f"d{k}f_dw{k}"] = cur
    return out


def derivative_conversions(triple):
    """Closed Wronskian forms of the w-derivatives of z and f."""
    p1 = triple.phi1
    dp1 = p1.derive()
    ddp1 = dp1.derive()
    out = {}
    for key, wr in (("z", triple.w21), ("f", triple.w31)):
        dwr = wr.derive()
        ddwr = dwr.derive()
        out[f"d{key}_dw"] = wr / p1**2
        out[f"d2{key}_dw2"] = dwr / p1**2 - 2 * wr * dp1 / p1**3
        out[f"d3{key}_dw3"] = (
            ddwr / p1**2
            - (4 * dwr * dp1 + 2 * wr * ddp1) / p1**3
            + 6 * wr * dp1**2 / p1**4
        )
    return out


def chain_quantities(triple):
    """z-derivatives of f re-expressed as functions of w.

    Keys: df_dz, d2f_dz2, d3f_dz3, and zdf_minus_f for z f'(z) - f(z).
    """
    p1 = triple.phi1
    dp1 = p1.derive()
    w21, w31, w32 = triple.w21, triple.w31, triple.w32
    w3121 = triple.w3121
    return {
        "df_dz": w31 / w21,
        "zdf_minus_f": w32 / w21,
        "d2f_dz2": w3121 * p1**2 / w21**3,
        "d3f_dz3": (
            (w3121.derive() * p1 + 2 * w3121 * dp1) * p1**3 / w21**4
            - 3 * w3121 * w21.derive() * p1**4 / w21**5
        ),
    }


# ---------------------------------------------------------------------------
# Structure vectors.


def _base_sym(fr):
    if fr.base is None:
        raise FrameError(f"frame {fr.label!r} has no base variable")
    return as_rde(fr.sym(fr.base), fr)


def phi0_vector(zfr):
    """(1, base, f) as a column over a gauged-space frame."""
    return (rde_one(zfr), _base_sym(zfr), as_rde(zfr.jet("f", 0), zfr))


def xi_vector(zfr):
    """(base f' - f, -f', 1): contracts with the parameter matrix to A f''."""
    z = _base_sym(zfr)
    f0 = as_rde(zfr.jet("f", 0), zfr)
    f1 = as_rde(zfr.jet("f", 1), zfr)
    return (z * f1 - f0, -f1, rde_one(zfr))


def zeta0_vector(zfr):
    """(base, -1, 0): contracts to -B."""
    return (_base_sym(zfr), -rde_one(zfr), rde_zero(zfr))


def zeta0_prime_vector(zfr):
    return (rde_one(zfr), rde_zero(zfr), rde_zero(zfr))


def zeta_vector(triple):
    """(phi2, -phi1, 0): the w-space image of the -B contraction."""
    fr = triple.frame
    return (triple.phi2, -triple.phi1, rde_zero(fr))


def w_vector(triple):
    """(pair(3,2), -pair(3,1), pair(2,1)) = phi x phi'."""
    return (triple.w32, -triple.w31, triple.w21)


def w_vector_prime(triple):
    """Componentwise derivative of w_vector; equals phi x phi''."""
    return (triple.w32.derive(), -triple.w31.derive(), triple.w21.derive())


def w_vector_second(triple):
    """(pair_d(3,2), -pair_d(3,1), pair_d(2,1)) = phi' x phi''."""
    return (triple.w3d2d, -triple.w3d1d, triple.w2d1d)


# ---------------------------------------------------------------------------
# Transformed supercharges and their sectors.


def _gauge_sandwich(frame, g1, g2, g3):
    """(d + g1'/g1)(d + g2'/g2)(d + g3'/g3) composed in conjugated form.

    Each first-order factor d + (log g)' equals (1/g) d g, so the triple
    product telescopes to

        (1/g1) d (g1/g2) d (g2/g3) d g3

    with only ratios of the gauge functions between the derivatives.
    Composing in this shape keeps every intermediate coefficient a
    combination of the ratios and their derivatives, which reduce
    against the denominators term by term; the expanded form of the
    same product is identical but drastically slower to normalize.
    """
    d = LinearDiffOperator.derivative(frame)
    mult = LinearDiffOperator.multiplication
    op = mult(g3)
    op = compose(d, op)
    op = compose(mult(g2 / g3), op)
    op = compose(d, op)
    op = compose(mult(g1 / g2), op)
    op = compose(d, op)
    return compose(mult(1 / g1), op)


def transformed_supercharge_minus(triple):
    """Third-order annihilator of <phi1, phi2, phi3> in the w-picture.

    Factored form; the detached prefactor records the cube of the
    q-derivative of w.  The three gauge ratios reproduce the factor
    coefficients (log phi1)' + (log w21)' - (log w3121)',
    (log phi1)' - (log w21)' and -(log phi1)' once w3121 is written as
    phi1 * wron3.
    """
    fr = triple.frame
    one = rde_one(fr)
    op = _gauge_sandwich(
        fr,
        triple.w21 / triple.wron3,
        triple.phi1 / triple.w21,
        one / triple.phi1,
    )
    return op.with_prefactor(3)


def transformed_supercharge_plus(triple):
    """Third-order annihilator of the dual sector in the w-picture."""
    fr = triple.frame
    op = _gauge_sandwich(
        fr,
        triple.phi1,
        triple.w21 / triple.phi1,
        triple.wron3 / triple.w21,
    )
    return (-op).with_prefactor(3)


def plus_sector(triple):
    """Basis of the sector annihilated by transformed_supercharge_plus."""
    gauge = triple.phi1 / triple.w3121
    return [gauge * triple.w21, gauge * triple.w31, gauge * triple.w32]


# ---------------------------------------------------------------------------
# Shifts of the gauge functions.


def EF_in_new_frame(triple):
    """Bracketed shift terms produced by the change of frame.

    Each value is a function of w; in the physical space it multiplies
    the q-derivative of w.  E_shift is subtracted from the first gauge
    function, W_shift is added to the superpotential-like one, F_shift
    (= 3 * W_shift) is added to the third, and F_expression is the full
    bracket whose product with dw/dq is the third gauge function of the
    new system.
    """
    lphi = logd(triple.phi1)
    lw21 = logd(triple.w21)
    lw3121 = logd(triple.w3121)
    w_shift = lw21 - lphi
    return {
        "E_shift": lw21 - 2 * lphi,
        "W_shift": w_shift,
        "F_shift": 3 * w_shift,
        "F_expression": lw3121 - 3 * lw21 + 2 * lphi,
    }


# ---------------------------------------------------------------------------
# Matrix forms of (A f'', B, C).


def matrix_form_ABC_z(entries, zfr):
    """Contractions against (1, base, f) in a gauged-space frame.

    Returns (A f'', B, C).  ``entries`` is a 3x3 nested sequence of
    scalars over ``zfr`` ordered so that row 1 holds the coefficients
    contracted into C, row 2 those of -B's affine part, row 3 the
    inhomogeneous ones.
    """
    entries = [[as_rde(e, zfr) for e in row] for row in entries]
    phi0 = phi0_vector(zfr)
    af = dot_matrix(xi_vector(zfr), entries, phi0)
    b = -dot_matrix(zeta0_vector(zfr), entries, phi0)
    c = dot_matrix(zeta0_prime_vector(zfr), entries, phi0)
    return af, b, c


def matrix_form_ABC_mid(entries, triple):
    """The same contractions pushed through z = phi2/phi1, f = phi3/phi1.

    Returns (A f'', B, C) as functions of w, before any rescaling of the
    quadratic data: these are the old functions evaluated along the new
    frame.
    """
    fr = triple.frame
    entries = [[as_rde(e, fr) for e in row] for row in entries]
    phi = triple.phi
    af = dot_matrix(w_vector(triple), entries, phi) / (triple.w21 * triple.phi1)
    b = -dot_matrix(zeta_vector(triple), entries, phi) / triple.phi1**2
    c = dot_matrix(
        (rde_one(fr), rde_zero(fr), rde_zero(fr)), entries, phi
    ) / triple.phi1
    return af, b, c


def matrix_form_ABC_hat(entries, triple):
    """Quadratic data of the *transformed* system in matrix form.

    Returns (A-hat, B-hat, C-hat) as functions of w, using the
    Wronskian vectors of the triple.  Note the first component is the
    transformed leading coefficient itself: the common prefactor
    phi1/nested-Wronskian already absorbs the second-derivative factor
    that the untransformed matrix form carries.
    """
    fr = triple.frame
    entries = [[as_rde(e, fr) for e in row] for row in entries]
    phi = triple.phi
    common = triple.phi1 / triple.w3121
    af = common * dot_matrix(w_vector(triple), entries, phi)
    b = -common * dot_matrix(w_vector_prime(triple), entries, phi)
    c = common * dot_matrix(w_vector_second(triple), entries, phi)
    return af, b, c
