"""Invertible constant changes of frame acting on the three-function basis.

A 3x3 invertible matrix mixes the basis (1, w, f(w)) into a new frame
triple.  This module provides the closed forms of every Wronskian of
such a triple, the induced adjoint action on the parameter matrix, the
covariance of the second-order data (checked through four independent
routes), the three invariant combinations of the gauge functions, and
the constants of the cubic operator algebra together with their
similarity invariance.
"""

from __future__ import annotations

from fractions import Fraction

from .diffalg import (
    CONST,
    Frame,
    FrameError,
    JET,
    as_rde,
    chain_images,
    qw_frame,
    rde_one,
    rde_zero,
    w_frame,
)
from .operators import LinearDiffOperator, compose, pullback
from .report import CheckResult
from .transform import (
    EF_in_new_frame,
    FrameTriple,
    dot_matrix,
    formal_triple,
    matrix_form_ABC_z,
    w_vector,
    w_vector_prime,
    w_vector_second,
    zeta_vector,
)
from .typeb import OmegaMatrix, build_system, invariants

GL3_LABELS = tuple(
    tuple(f"l{i}{j}" for j in (1, 2, 3)) for i in (1, 2, 3)
)


def _minor(rows, i, j):
    r = [x for k, x in enumerate(rows) if k != i]
    m = [[x for k, x in enumerate(row) if k != j] for row in r]
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


def _cofactor_rows(rows):
    """Cofactor of each entry, same layout as the matrix itself."""
    return tuple(
        tuple((-1) ** (i + j) * _minor(rows, i, j) for j in range(3))
        for i in range(3)
    )


def _det3(rows):
    return (
        rows[0][0] * _minor(rows, 0, 0)
        - rows[0][1] * _minor(rows, 0, 1)
        + rows[0][2] * _minor(rows, 0, 2)
    )


def _matmul(a, b):
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(1, 3)) + a[i][0] * b[0][j]
              for j in range(3))
        for i in range(3)
    )


class GL3Matrix:
    """3x3 invertible change-of-frame matrix with exact entries.

    Entries are Fractions or strings naming symbolic constants.  The
    inverse follows the cofactor convention: with lbar[i][j] the
    cofactor of entry (i, j), the inverse is the transposed cofactor
    matrix divided by the determinant.
    """

    __slots__ = ("rows",)

    def __init__(self, rows):
        rows = tuple(tuple(row) for row in rows)
        if len(rows) != 3 or any(len(r) != 3 for r in rows):
            raise ValueError("expected a 3x3 array of entries")
        checked = []
        for row in rows:
            out = []
            for e in row:
                if isinstance(e, str):
                    out.append(e)
                elif isinstance(e, (int, Fraction)):
                    out.append(Fraction(e))
                else:
                    raise TypeError(
                        f"entry {e!r} must be an exact rational or a symbol name"
                    )
            checked.append(tuple(out))
        object.__setattr__(self, "rows", tuple(checked))
        if not self.is_symbolic() and self.det() == 0:
            raise ValueError("change-of-frame matrix must be invertible")

    def __setattr__(self, *_):
        raise AttributeError("GL3Matrix is immutable")

    @staticmethod
    def identity():
        return GL3Matrix.diagonal(1, 1, 1)

    @staticmethod
    def diagonal(d1, d2, d3):
        return GL3Matrix(((d1, 0, 0), (0, d2, 0), (0, 0, d3)))

    @staticmethod
    def symbolic():
        return GL3Matrix(GL3_LABELS)

    @staticmethod
    def random_integer(rng, bound=5):
        while True:
            rows = tuple(
                tuple(rng.randint(-bound, bound) for _ in range(3))
                for _ in range(3)
            )
            if _det3(rows) != 0:
                return GL3Matrix(rows)

    @property
    def symbols(self):
        seen = dict.fromkeys(e for row in self.rows for e in row if isinstance(e, str))
        return tuple(seen)

    def is_symbolic(self):
        return bool(self.symbols)

    def det(self):
        if self.is_symbolic():
            raise TypeError("symbolic matrix: use det_over with a frame")
        return _det3(self.rows)

    def cofactors(self):
        if self.is_symbolic():
            raise TypeError("symbolic matrix: use cofactors_over with a frame")
        return _cofactor_rows(self.rows)

    def inverse_rows(self):
        """Exact inverse as nested Fractions (transposed cofactors / det)."""
        det = self.det()
        cof = self.cofactors()
        return tuple(
            tuple(cof[j][i] / det for j in range(3)) for i in range(3)
        )

    def entries_over(self, frame):
        return tuple(
            tuple(
                as_rde(frame.sym(e) if isinstance(e, str) else frame.const(e), frame)
                for e in row
            )
            for row in self.rows
        )

    def det_over(self, frame):
        return _det3(self.entries_over(frame))

    def cofactors_over(self, frame):
        return _cofactor_rows(self.entries_over(frame))

    def inverse_over(self, frame):
        entries = self.entries_over(frame)
        det = _det3(entries)
        if det.is_zero():
            raise ValueError("change-of-frame matrix must be invertible")
        cof = _cofactor_rows(entries)
        return tuple(
            tuple(cof[j][i] / det for j in range(3)) for i in range(3)
        )

    def __eq__(self, other):
        if not isinstance(other, GL3Matrix):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"GL3Matrix({self.rows!r})"


# ---------------------------------------------------------------------------
# The frame triple of a matrix and the closed Wronskian forms.


def gl3_frame(lam, constants=(), budget=None):
    """FrameTriple with components linear in (1, w, f(w)).

    ``constants`` names extra frame constants (typically the symbols of
    a parameter matrix that will be contracted against the triple).
    """
    if not lam.is_symbolic() and _det3(lam.rows) == 0:
        raise FrameError("change-of-frame matrix must be invertible")
    names = tuple(lam.symbols) + tuple(n for n in constants if n not in lam.symbols)
    fr = w_frame(constants=names) if budget is None else w_frame(
        constants=names, budget=budget)
    w = as_rde(fr.sym("w"), fr)
    f = as_rde(fr.jet("f"), fr)
    entries = lam.entries_over(fr)
    phis = [row[0] + row[1] * w + row[2] * f for row in entries]
    return FrameTriple(*phis)


def closed_form_wronskians(lam, triple):
    """Every Wronskian of the triple, written through cofactors alone.

    Keys match the FrameTriple attributes; ``wron3`` is det times the
    second derivative of f.
    """
    fr = triple.frame
    w = as_rde(fr.sym("w"), fr)
    f = as_rde(fr.jet("f"), fr)
    df = as_rde(fr.jet("f", 1), fr)
    ddf = as_rde(fr.jet("f", 2), fr)
    legendre = w * df - f
    cof = lam.cofactors_over(fr)
    det = lam.det_over(fr)
    return {
        "w21": cof[2][2] - cof[2][1] * df + cof[2][0] * legendre,
        "w31": -cof[1][2] + cof[1][1] * df - cof[1][0] * legendre,
        "w32": cof[0][2] - cof[0][1] * df + cof[0][0] * legendre,
        "w3121": det * triple.phi1 * ddf,
        "wron3": det * ddf,
        "w2d1d": cof[2][0] * ddf,
        "w3d1d": -cof[1][0] * ddf,
        "w3d2d": cof[0][0] * ddf,
    }


def verify_wronskian_forms(lam):
    """Direct Wronskian computation equals every closed form."""
    triple = gl3_frame(lam)
    forms = closed_form_wronskians(lam, triple)
    for key, want in forms.items():
        got = getattr(triple, key)
        if not (got - want).is_zero():
            return CheckResult(
                "wronskian-forms", False, residual=f"{key} disagrees")
    return CheckResult("wronskian-forms", True, details=(f"{len(forms)} forms",))


# ---------------------------------------------------------------------------
# Adjoint action on the parameter matrix.


def adjoint_transform(omega, lam):
    """Parameter matrix conjugated by the frame change, exactly.

    Both matrices must be numeric; the symbolic counterpart is
    adjoint_entries_over.
    """
    if omega.is_symbolic() or lam.is_symbolic():
        raise TypeError("symbolic data: use adjoint_entries_over with a frame")
    rows = _matmul(_matmul(lam.inverse_rows(), omega.rows), lam.rows)
    return OmegaMatrix(rows)


def adjoint_entries_over(omega, lam, frame):
    """Conjugated parameter matrix as scalars over ``frame``."""
    return _matmul(
        _matmul(lam.inverse_over(frame), omega.entries_over(frame)),
        lam.entries_over(frame),
    )


# ---------------------------------------------------------------------------
# Covariance of the second-order data.


def _second_order_routes(omega, lam):
    """The transformed (A, B, C, Q) by substitution and by matrix form.

    The substitution route starts from the old data expressed along the
    new frame (the mid contractions divided by f'' of z) and applies
    the quartic/quadratic Wronskian rescalings.  All quotients are
    cleared by hand first: with pa, pb, pc the raw contraction
    polynomials and the nested Wronskian replaced by its closed form
    det * phi1 * f'', the old leading coefficient along the frame is
    pa w21^2 / (det f'' phi1^4), and everything downstream stays a
    short combination of small coprime factors.  Working with the
    uncancelled quotients instead makes the intermediate numerators
    explode for a fully symbolic matrix.
    """
    triple = gl3_frame(lam, constants=omega.symbols)
    fr = triple.frame
    entries = omega.entries_over(fr)
    p1 = triple.phi1
    dp1 = p1.derive()
    w21 = triple.w21
    dw21 = w21.derive()
    f2 = as_rde(fr.jet("f", 2), fr)
    f3 = as_rde(fr.jet("f", 3), fr)
    det = lam.det_over(fr)
    phi = triple.phi

    # the closed forms this clearing relies on, checked here so the
    # certificate does not silently assume them
    lemmas = (
        ("nested Wronskian closed form", triple.w3121 - det * p1 * f2),
        ("derivative-pair closed form",
         triple.w2d1d - lam.cofactors_over(fr)[2][0] * f2),
    )

    pa = dot_matrix(w_vector(triple), entries, phi)
    pb = -dot_matrix(zeta_vector(triple), entries, phi)
    pc = dot_matrix((rde_one(fr), rde_zero(fr), rde_zero(fr)), entries, phi)
    dpa = pa.derive()
    den = det * f2

    # mid B contributes -pb/phi1^2 and mid C pc/phi1 along the frame
    a_sub = pa / den
    b_sub = pb / w21 - pa * dw21 / (den * w21)
    c_sub = (
        pc / p1
        - pb * dp1 / (p1 * w21)
        + pa * triple.w2d1d / (den * w21)
    )
    # Q-hat needs dA/dz along the frame: quotient rule on
    # pa w21^2 / (det f'' phi1^4), then the same quartic rescaling
    da_scaled = (dpa * w21 + 2 * pa * dw21) / (den * w21) - pa * (
        f3 * p1 + 4 * f2 * dp1
    ) / (den * f2 * p1)
    q_sub = (
        pb / w21
        + da_scaled * Fraction(1, 2)
        - 2 * (pa / den) * (dw21 / w21 - dp1 / p1)
    )

    # hat route: the Wronskian-vector matrix form with the same closed
    # denominator (equal to matrix_form_ABC_hat once the lemmas hold)
    pbp = dot_matrix(w_vector_prime(triple), entries, phi)
    pcs = dot_matrix(w_vector_second(triple), entries, phi)
    hat = (pa / den, -pbp / den, pcs / den)
    return triple, lemmas, (a_sub, b_sub, c_sub, q_sub), hat


def verify_ABC_covariance(omega, lam):
    """The transformed second-order data is the adjoint matrix's data.

    Four routes must agree exactly: the substitution rule applied to
    the old functions, the Wronskian-vector matrix form, the plain
    matrix form of the conjugated parameter matrix read in the new
    base, and the gauge-conjugated pullback of the old operator.
    """
    triple, lemmas, sub, hat = _second_order_routes(omega, lam)
    fr = triple.frame
    a_sub, b_sub, c_sub, q_sub = sub
    a_hat, b_hat, c_hat = hat

    checks = list(lemmas) + [
        ("substitution vs matrix form: A", a_sub - a_hat),
        ("substitution vs matrix form: B", b_sub - b_hat),
        ("substitution vs matrix form: C", c_sub - c_hat),
        ("Q vs B + A'/2", q_sub - b_hat - a_hat.derive() * Fraction(1, 2)),
    ]

    adj = adjoint_entries_over(omega, lam, fr)
    af_adj, b_adj, c_adj = matrix_form_ABC_z(adj, fr)
    ddf = as_rde(fr.jet("f", 2), fr)
    checks += [
        ("adjoint route: A", af_adj / ddf - a_hat),
        ("adjoint route: B", b_adj - b_hat),
        ("adjoint route: C", c_adj - c_hat),
    ]

    # operator pullback: gauge-conjugate the old operator through
    # z = phi2/phi1, f = phi3/phi1 and compare with the hat data
    sys = build_system(omega)
    images = chain_images(
        "f", triple.new_f(), triple.new_z().derive(), 3,
        extra={("z", 0): triple.new_z()},
    )
    dz_dw = triple.w21 / triple.phi1**2
    pulled = pullback(sys.hamiltonian, images, 1 / dz_dw, triple.phi1)
    target = LinearDiffOperator((-c_hat, -b_hat, -a_hat))
    diff = pulled - target
    for k in range(diff.order + 1):
        checks.append((f"operator pullback: order {k}", diff.coefficient(k)))

    for label, residual in checks:
        if not residual.is_zero():
            return CheckResult("abc-covariance", False, residual=label)
    return CheckResult("abc-covariance", True, details=(f"{len(checks)} identities",))


# ---------------------------------------------------------------------------
# Transformation of the gauge functions and the invariants.


def free_gauge_functions(triple, budget=None):
    """E, W, F as unconstrained jets over the physical-variable frame
    that also carries the triple's base variable."""
    fr = triple.frame
    constants = tuple(sorted(n for n, (kind, _) in fr.rules.items() if kind == CONST))
    qfr = qw_frame(constants=constants, formal_phi="phi1" in fr.rules,
                   budget=fr.budget if budget is None else budget)
    return tuple(as_rde(qfr.sym(n), qfr) for n in ("E", "W", "F"))


def transform_EWF(E, W, F, triple):
    """Gauge functions of the transformed system.

    The shifts are functions of the new base variable times its
    q-derivative; they move E down by the pair-Wronskian bracket and W
    and F up by one and three times the common bracket.
    """
    shifts = EF_in_new_frame(triple)
    qfr = E.frame
    if "w" not in qfr.rules:
        raise FrameError("expected scalars over a frame with a w tower")
    dw = as_rde(qfr.jet("w", 1), qfr)
    return {
        "E": E - shifts["E_shift"].reframe(qfr) * dw,
        "W": W + shifts["W_shift"].reframe(qfr) * dw,
        "F": F + shifts["F_shift"].reframe(qfr) * dw,
    }


def _bracket_defects(triple):
    """The two expressions whose vanishing marks a consistent frame.

    Returns (pair_defect, third_defect): the first couples the pair
    Wronskian and phi1 to f'' and f''', the second is phi1''' f'' -
    phi1'' f'''.  Both are identically zero when the triple comes from
    a constant matrix acting on (1, w, f), and generically nonzero for
    free basis jets.
    """
    fr = triple.frame
    ddf = as_rde(fr.jet("f", 2), fr)
    dddf = as_rde(fr.jet("f", 3), fr)
    p1 = triple.phi1
    dp1 = p1.derive()
    ddp1 = dp1.derive()
    w21 = triple.w21
    dw21 = w21.derive()
    pair = (dw21.derive() * p1 - dw21 * dp1 + w21 * ddp1) * ddf \
        - dw21 * p1 * dddf
    third = ddp1.derive() * ddf - ddp1 * dddf
    return pair, third


def _anchored_gauge_pair(triple, qfr):
    """First and third gauge functions the frame actually produces,
    with their transforms, over the physical-variable frame.

    Returns ((E, F), (E_hat, F_hat), brackets).  E is w''/w' plus the
    pair bracket times w', F the full third bracket times w'; the
    hatted pair drops the brackets entirely.
    """
    sh = EF_in_new_frame(triple)
    e_br = sh["E_shift"].reframe(qfr)
    s_br = sh["W_shift"].reframe(qfr)
    f_br = sh["F_expression"].reframe(qfr)
    w1 = as_rde(qfr.jet("w", 1), qfr)
    u = as_rde(qfr.jet("w", 2), qfr) / w1
    ratio = as_rde(qfr.jet("f", 3), qfr) / as_rde(qfr.jet("f", 2), qfr)
    plain = (u + e_br * w1, f_br * w1)
    hatted = (u, ratio * w1)
    return plain, hatted, (e_br, s_br, f_br, w1)


def invariant_correction_identities(budget=None):
    """Exact defect factorizations of the two nonlinear combinations.

    Works in the algebra of the three logarithmic brackets a change of
    frame produces: one for the pair Wronskian, one for the first
    triple component, one for the ratio f'''/f''; the nested-Wronskian
    bracket is locked to the sum of the last two, which is exactly what
    frame consistency forces.  With the brackets otherwise free, the
    quadratic and cubic combinations of the anchored gauge pair pick up
    nonzero correction terms, and this check pins those corrections to
    their closed forms.  Every piece of both corrections is a multiple
    of a consistent frame's two vanishing defects, so the factorized
    forms are the sharp version of the invariance statement.
    """
    rules = {
        "w": (JET, None),
        "lw": (JET, "w"),
        "lp": (JET, "w"),
        "lf": (JET, "w"),
    }
    fr = Frame("qbracket", rules) if budget is None else Frame(
        "qbracket", rules, budget)
    lw = as_rde(fr.jet("lw", 0), fr)
    lp = as_rde(fr.jet("lp", 0), fr)
    lf = as_rde(fr.jet("lf", 0), fr)
    dlw = as_rde(fr.jet("lw", 1), fr)
    dlp = as_rde(fr.jet("lp", 1), fr)
    ddlp = as_rde(fr.jet("lp", 2), fr)
    w1 = as_rde(fr.jet("w", 1), fr)
    u = as_rde(fr.jet("w", 2), fr) / w1

    plain = (u + (lw - 2 * lp) * w1, (3 * lp + lf - 3 * lw) * w1)
    hatted = (u, lf * w1)
    zero = rde_zero(fr)
    old = invariants(plain[0], zero, plain[1])
    new = invariants(hatted[0], zero, hatted[1])

    # the pair-Wronskian defect and the phi1 third-derivative defect,
    # divided by their natural normalizers
    pair_term = dlw + lw * lw + dlp + lp * lp - lw * lp - lw * lf
    third_term = ddlp + 3 * lp * dlp + lp**3 - (dlp + lp * lp) * lf
    corr2 = pair_term
    corr3 = (
        -6 * third_term
        + (3 * (lp - lw) - 5 * lf) * pair_term
        + 3 * (pair_term.derive() / w1 + (lw + lp + lf) * pair_term)
    )
    pairs = (
        ("quadratic defect factorization", new[1] - old[1] - corr2 * w1**2),
        ("cubic defect factorization", new[2] - old[2] - corr3 * w1**3),
    )
    for label, r in pairs:
        if not r.is_zero():
            return CheckResult("invariant-corrections", False, residual=label)
    return CheckResult("invariant-corrections", True)


def verify_invariants(lam):
    """The three invariant combinations survive the frame change.

    Four layers, all exact.  First, the two bracket defects of the
    consistent frame vanish.  Second, the statements that hold for
    fully free gauge scalars: the linear combination is unchanged and
    the three first-order factor shifts take their closed forms and sum
    to zero.  Third, the quadratic and cubic combinations agree on the
    gauge pair the frame actually produces; for unconstrained scalars
    those two are not preserved (the cross terms cancel only on the
    produced pair), so the anchored equality carries the content.
    Fourth, the defect factorizations behind layer three hold over a
    frame with free basis jets.
    """
    triple = gl3_frame(lam)
    pair, third = _bracket_defects(triple)
    if not pair.is_zero():
        return CheckResult("invariants", False, residual="pair-Wronskian identity")
    if not third.is_zero():
        return CheckResult("invariants", False, residual="phi1 derivative identity")

    E, W, F = free_gauge_functions(triple)
    hat = transform_EWF(E, W, F, triple)
    qfr = E.frame
    plain, hatted, (e_br, s_br, f_br, w1) = _anchored_gauge_pair(triple, qfr)
    lphi = s_br - e_br
    lw21 = 2 * s_br - e_br
    shift_low = (hat["W"] - hat["E"] - hat["F"]) - (W - E - F)
    shift_mid = hat["W"] - W
    shift_top = (hat["W"] + hat["E"]) - (W + E)
    third_f = Fraction(1, 3)
    old = invariants(plain[0], rde_zero(qfr), plain[1])
    new = invariants(hatted[0], rde_zero(qfr), hatted[1])
    checks = (
        ("linear invariant, free scalars",
         (hat["W"] - hat["F"] * third_f) - (W - F * third_f)),
        ("lowest factor shift", shift_low + lw21 * w1),
        ("middle factor shift", shift_mid - s_br * w1),
        ("top factor shift", shift_top - lphi * w1),
        ("factor shifts sum", shift_low + shift_mid + shift_top),
        ("third gauge function transform", plain[1] + 3 * s_br * w1 - hatted[1]),
        ("quadratic invariant, anchored", new[1] - old[1]),
        ("cubic invariant, anchored", new[2] - old[2]),
    )
    for label, r in checks:
        if not r.is_zero():
            return CheckResult("invariants", False, residual=label)
    corr = invariant_correction_identities(budget=triple.frame.budget)
    if not corr.passed:
        return CheckResult("invariants", False, residual=corr.residual)
    return CheckResult("invariants", True, details=("12 identities",))


# ---------------------------------------------------------------------------
# Constants of the cubic operator algebra.


class SuperalgebraConstants:
    """The three similarity invariants entering the cubic algebra."""

    __slots__ = ("c0", "c1", "c2")

    def __init__(self, c0, c1, c2):
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    def __setattr__(self, *_):
        raise AttributeError("SuperalgebraConstants is immutable")

    def unpack(self):
        return self.c0, self.c1, self.c2

    def __eq__(self, other):
        if not isinstance(other, SuperalgebraConstants):
            return NotImplemented
        mine, theirs = self.unpack(), other.unpack()
        if all(isinstance(x, Fraction) for x in mine + theirs):
            return mine == theirs
        return all((x - y).is_zero() for x, y in zip(mine, theirs))

    def __repr__(self):
        return f"SuperalgebraConstants({self.c0!r}, {self.c1!r}, {self.c2!r})"


def _symmetric_invariants(entries):
    """Trace, second elementary symmetric function, determinant."""
    t1 = entries[0][0] + entries[1][1] + entries[2][2]
    e2 = (
        entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0]
        + entries[0][0] * entries[2][2] - entries[0][2] * entries[2][0]
        + entries[1][1] * entries[2][2] - entries[1][2] * entries[2][1]
    )
    return t1, e2, _det3(entries)


def _constants_from(entries):
    t1, e2, e3 = _symmetric_invariants(entries)
    third = Fraction(1, 3)
    c0 = t1 * third
    c1 = e2 - t1 * t1 * third
    c2 = e3 - t1 * e2 * third + t1 * t1 * t1 * Fraction(2, 27)
    return SuperalgebraConstants(c0, c1, c2)


def superalgebra_constants(omega, frame=None):
    """Constants matching the depressed-cubic form of the char poly.

    With t1, e2, e3 the symmetric invariants of the parameter matrix,
    det(x + matrix) = (x + C0)^3 + C1 (x + C0) + C2 fixes

        C0 = t1/3,  C1 = e2 - t1^2/3,  C2 = e3 - t1 e2/3 + 2 t1^3/27.

    Numeric matrices give Fractions; a frame lifts the entries (and any
    symbols) to scalars over it.
    """
    if frame is None:
        if omega.is_symbolic():
            frame = w_frame(constants=omega.symbols)
        else:
            return _constants_from(omega.rows)
    return _constants_from(omega.entries_over(frame))


def verify_constants_forms(omega, frame=None):
    """Every advertised expression for the constants agrees.

    Cross-checks the depressed-cubic values against the expanded
    degree-wise polynomials in the nine entries, against the
    trace/determinant forms (with det times the trace of the inverse
    kept polynomial, so singular matrices need no special case), and
    against the characteristic polynomial coefficient by coefficient.
    """
    if frame is None and omega.is_symbolic():
        frame = w_frame(constants=omega.symbols)
    if frame is None:
        entries = omega.rows
        one = Fraction(1)
    else:
        entries = omega.entries_over(frame)
        one = rde_one(frame)
    (c0, b0, a0) = (entries[0][0], entries[1][0], entries[2][0])
    (c1, b1, a1) = (entries[0][1], entries[1][1], entries[2][1])
    (c2, b2, a2) = (entries[0][2], entries[1][2], entries[2][2])
    k = superalgebra_constants(omega, frame)
    t1, e2, e3 = _symmetric_invariants(entries)

    expanded_c1 = (
        -a2 * a2 + a2 * b1 - 3 * a1 * b2 + a2 * c0 - 3 * a0 * c2
        - b1 * b1 + b1 * c0 - 3 * b0 * c1 - c0 * c0
    ) * Fraction(1, 3)
    expanded_c2 = (
        2 * a2**3 - 3 * a2**2 * b1 - 3 * a2**2 * c0
        + 9 * a1 * a2 * b2 + 9 * a0 * a2 * c2 - 3 * a2 * b1**2
        + 12 * a2 * b1 * c0 - 18 * a2 * b0 * c1 - 3 * a2 * c0**2
        - 18 * a1 * b2 * c0 + 9 * a1 * b1 * b2
        + 27 * a1 * b0 * c2 + 27 * a0 * b2 * c1 - 18 * a0 * b1 * c2
        + 9 * a0 * c0 * c2 + 2 * b1**3
        - 3 * b1**2 * c0 + 9 * b0 * b1 * c1 - 3 * b1 * c0**2
        + 9 * b0 * c0 * c1 + 2 * c0**3
    ) * Fraction(1, 27)

    herm = Fraction(1, 3)
    residuals = (
        ("expanded C0", k.c0 - (a2 + b1 + c0) * herm),
        ("expanded C1", k.c1 - expanded_c1),
        ("expanded C2", k.c2 - expanded_c2),
        # trace forms; e2 stands in for det times trace of the inverse
        ("trace form C1", 3 * k.c1 + t1 * t1 - 3 * e2),
        ("trace form C2", 27 * k.c2 - 2 * t1**3 + 9 * t1 * e2 - 27 * e3),
        # char poly, coefficient by coefficient
        ("char poly x^2", 3 * k.c0 - t1),
        ("char poly x^1", 3 * k.c0 * k.c0 + k.c1 - e2),
        ("char poly x^0", k.c0**3 + k.c0 * k.c1 + k.c2 - e3),
    )
    for label, r in residuals:
        bad = (r != 0) if isinstance(r, Fraction) else not r.is_zero()
        if bad:
            return CheckResult("constants-forms", False, residual=label)
    del one
    return CheckResult("constants-forms", True)


def verify_invariance_of_constants(omega, lam):
    """Conjugating the parameter matrix leaves the constants alone."""
    if omega.is_symbolic() or lam.is_symbolic():
        frame = w_frame(constants=tuple(omega.symbols) + tuple(
            n for n in lam.symbols if n not in omega.symbols))
        before = _constants_from(omega.entries_over(frame))
        after = _constants_from(adjoint_entries_over(omega, lam, frame))
    else:
        before = superalgebra_constants(omega)
        after = superalgebra_constants(adjoint_transform(omega, lam))
    if before == after:
        return CheckResult("constants-invariance", True)
    return CheckResult(
        "constants-invariance", False,
        residual=f"{before!r} became {after!r}")


# ---------------------------------------------------------------------------
# The cubic algebra itself.


def _cubic_combination(sys, consts):
    """(H + C0)^3 + C1 (H + C0) + C2 over the system frame."""
    fr = sys.frame
    mult = LinearDiffOperator.multiplication
    hc = sys.hamiltonian + mult(consts.c0)
    cube = compose(hc, compose(hc, hc))
    return cube + compose(mult(consts.c1), hc) + mult(consts.c2)


def verify_superalgebra(omega, fspec=None, budget=None):
    """Cubic algebra, in two tiers.

    Tier 1 (gating): the cubic combination of the operator and the
    constants annihilates the preserved span; this is the matrix
    characteristic polynomial acting through the span and holds for
    every system.  Tier 2 (informational, reported in details): the
    sixth-order factored product equals 8 times the cubic combination,
    with the overall scalar taken as a rational multiple of the cube of
    the leading coefficient; the multiple that validates is recorded.
    """
    sys = build_system(omega, fspec, budget)
    fr = sys.frame
    consts = _constants_from(omega.entries_over(fr))
    cubic = _cubic_combination(sys, consts)
    for i, u in enumerate(sys.minus_sector):
        r = rde_zero(fr) if cubic.is_zero() else cubic.apply(u)
        if not r.is_zero():
            return CheckResult(
                "superalgebra", False,
                residual=f"cubic combination on basis index {i}")

    if sys.A.is_zero():
        note = "tier2: skipped (leading coefficient vanishes)"
    elif sys.is_formal() and fr.budget < 8:
        note = "tier2: skipped (formal f needs jet budget >= 8)"
    else:
        note = _tier2_note(sys, cubic)
    return CheckResult("superalgebra", True, details=(note,))


def _tier2_note(sys, cubic):
    fr = sys.frame
    mult = LinearDiffOperator.multiplication
    d = LinearDiffOperator.derivative(fr)
    g = mult((2 * sys.A.derive() + sys.B) / sys.A)
    r = mult(sys.f[3] / sys.f[2])
    product = compose(d, d)
    product = compose(d - r, product)
    product = compose(d + g + r, product)
    product = compose(d + g, product)
    product = compose(d + g, product)
    eight = as_rde(fr.const(8), fr)
    target = compose(mult(eight), cubic)
    acube = sys.A ** 3
    for sigma in (-8, 8, -1, 1, -2, 2, -4, 4, -16, 16):
        lhs = compose(mult(acube * sigma), product)
        if (lhs - target).is_zero():
            return f"tier2: scalar {sigma} * A^3 validates"
    return "tier2: no rational multiple of A^3 validates"
