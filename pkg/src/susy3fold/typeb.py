"""Systems built from a 3x3 parameter matrix: operators, gauge data, checks.

A parameter matrix contracted against the column (1, z, f(z)) yields the
coefficients of a second-order operator -A d^2 - B d - C that maps the
span of those three functions into itself.  This module constructs that
operator together with the factored third-order annihilators of the span
and of its dual, moves the data into the physical picture through the
quadratic extension s = z'(q) (s^2 = 2A), and verifies the defining
identities: preservation of the span, the two differential constraints
on the gauge functions E, W, F, the exact reduction of the intertwining
residual to those constraints, and the reconstruction of the supercharge
and the potentials from the three fundamental invariants.
"""

from __future__ import annotations

from fractions import Fraction

from .diffalg import (
    CONST,
    DEFAULT_BUDGET,
    DiffPolynomial,
    RDE,
    SqrtExt,
    as_rde,
    format_rde,
    q_frame,
    qw_frame,
    rde_one,
    rde_zero,
    substitute_f,
    z_frame,
)
from .operators import LinearDiffOperator, compose, format_operator
from .report import CheckResult
from .transform import logd, matrix_form_ABC_z


class DegenerateSystemError(ValueError):
    """The f choice or the leading coefficient collapses the system."""


# ---------------------------------------------------------------------------
# Parameter matrix.

OMEGA_LABELS = (("c0", "c1", "c2"), ("b0", "b1", "b2"), ("a0", "a1", "a2"))


class OmegaMatrix:
    """3x3 exact parameter matrix.

    Entries are Fractions, or strings naming symbolic constants.  The
    matrix is minus the matrix of the constructed operator restricted to
    the basis (1, z, f); it may be singular (only changes of frame need
    an invertible matrix).
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

    def __setattr__(self, *_):
        raise AttributeError("OmegaMatrix is immutable")

    @staticmethod
    def zeros():
        return OmegaMatrix(((0, 0, 0),) * 3)

    @staticmethod
    def identity():
        return OmegaMatrix.diagonal(1, 1, 1)

    @staticmethod
    def diagonal(d1, d2, d3):
        return OmegaMatrix(((d1, 0, 0), (0, d2, 0), (0, 0, d3)))

    @staticmethod
    def symbolic():
        return OmegaMatrix(OMEGA_LABELS)

    @staticmethod
    def random_integer(rng, bound=5):
        return OmegaMatrix(
            tuple(tuple(rng.randint(-bound, bound) for _ in range(3)) for _ in range(3))
        )

    @property
    def symbols(self):
        seen = dict.fromkeys(e for row in self.rows for e in row if isinstance(e, str))
        return tuple(seen)

    def is_symbolic(self):
        return bool(self.symbols)

    def entries_over(self, frame):
        """Rows as RDE scalars; symbolic entries must be frame constants."""
        return tuple(
            tuple(
                as_rde(frame.sym(e) if isinstance(e, str) else frame.const(e), frame)
                for e in row
            )
            for row in self.rows
        )

    def __eq__(self, other):
        if not isinstance(other, OmegaMatrix):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"OmegaMatrix({self.rows!r})"


# ---------------------------------------------------------------------------
# System construction.


def _coerce_fspec(fspec, frame):
    """Reframe a concrete f choice into the system frame; None = formal."""
    if fspec is None:
        return None
    if isinstance(fspec, (int, Fraction)):
        return as_rde(frame.const(fspec), frame)
    if isinstance(fspec, DiffPolynomial):
        fspec = as_rde(fspec, fspec.frame)
    if not isinstance(fspec, RDE):
        raise TypeError("fspec must be None, an exact rational, or an expression in z")
    extra = (fspec.num.variables() | fspec.den.variables()) - {("z", 0)}
    if extra:
        raise ValueError(f"fspec must depend on z alone; found jets {sorted(extra)}")
    return fspec.reframe(frame)


class TypeBSystem:
    """A constructed quasi-solvable system and its derived operators.

    ``f`` holds (f, f', f'', f''') as scalars over ``frame``: jets for a
    formal choice, otherwise derivatives of the concrete ``fspec``.  The
    leading coefficient A keeps its 1/f'' denominator.  Both supercharges
    carry the detached prefactor s^3 (the cube of z'(q)) in their
    ``scalar_power``; it never vanishes, so sector statements ignore it.
    """

    __slots__ = (
        "omega", "frame", "fspec", "f", "A", "B", "C", "Q", "hamiltonian",
        "supercharge_minus", "supercharge_plus", "minus_sector", "plus_sector",
    )

    def __init__(self, omega, fspec=None, budget=None):
        if not isinstance(omega, OmegaMatrix):
            omega = OmegaMatrix(omega)
        frame = z_frame(constants=omega.symbols,
                        budget=DEFAULT_BUDGET if budget is None else budget)
        fspec = _coerce_fspec(fspec, frame)
        if fspec is None:
            f = tuple(as_rde(frame.jet("f", k), frame) for k in range(4))
        else:
            f = [fspec]
            for _ in range(3):
                f.append(f[-1].derive())
            f = tuple(f)
        if f[2].is_zero():
            raise DegenerateSystemError(
                "f'' vanishes identically: (1, z, f) does not span a 3-space")
        af, b, c = matrix_form_ABC_z(omega.entries_over(frame), frame)
        if fspec is not None:
            af = substitute_f(af, fspec)
            b = substitute_f(b, fspec)
            c = substitute_f(c, fspec)
        a = af / f[2]
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "fspec", fspec)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "Q", b + a.derive() * Fraction(1, 2))
        object.__setattr__(self, "hamiltonian", LinearDiffOperator((-c, -b, -a)))
        d = LinearDiffOperator.derivative(frame)
        d2 = compose(d, d)
        ratio = LinearDiffOperator.multiplication(f[3] / f[2])
        object.__setattr__(
            self, "supercharge_minus", compose(d - ratio, d2).with_prefactor(3))
        object.__setattr__(
            self, "supercharge_plus", (-compose(d2, d + ratio)).with_prefactor(3))
        z = as_rde(frame.sym("z"), frame)
        object.__setattr__(self, "minus_sector", (rde_one(frame), z, f[0]))
        gauge = rde_one(frame) / f[2]
        object.__setattr__(
            self, "plus_sector",
            (gauge, f[1] * gauge, (z * f[1] - f[0]) * gauge))

    def __setattr__(self, *_):
        raise AttributeError("TypeBSystem is immutable")

    def is_formal(self):
        return self.fspec is None

    def __repr__(self):
        kind = "formal f" if self.is_formal() else f"f = {format_rde(self.fspec)}"
        return f"TypeBSystem({self.omega!r}, {kind})"


def build_system(omega, fspec=None, budget=None):
    """Construct the full system for a parameter matrix and an f choice."""
    return TypeBSystem(omega, fspec, budget)


# ---------------------------------------------------------------------------
# Preservation and sector checks.


def preservation_residuals(op, sector, entries):
    """op(phi_i) + (matrix . phi)_i for the three basis functions."""
    out = []
    for row, u in zip(entries, sector):
        lin = row[0] * sector[0] + row[1] * sector[1] + row[2] * sector[2]
        image = rde_zero(u.frame) if op.is_zero() else op.apply(u)
        out.append(image + lin)
    return tuple(out)


def verify_preservation(sys):
    """The operator acts on the span of (1, z, f) as minus the matrix."""
    entries = sys.omega.entries_over(sys.frame)
    res = preservation_residuals(sys.hamiltonian, sys.minus_sector, entries)
    for i, r in enumerate(res):
        if not r.is_zero():
            return CheckResult(
                "preservation", False,
                residual=f"basis index {i}: {format_rde(r)}")
    return CheckResult("preservation", True)


def verify_sectors(sys):
    """Both third-order annihilators kill their three-dimensional sectors."""
    checks = (
        ("minus", sys.supercharge_minus, sys.minus_sector),
        ("plus", sys.supercharge_plus, sys.plus_sector),
    )
    for tag, op, sector in checks:
        for i, u in enumerate(sector):
            r = op.apply(u)
            if not r.is_zero():
                return CheckResult(
                    "sector-annihilation", False,
                    residual=f"{tag} sector, basis index {i}: {format_rde(r)}")
    return CheckResult("sector-annihilation", True)


# ---------------------------------------------------------------------------
# Gauge functions of the physical picture.


class QSpaceFunctions:
    """The gauge functions E, W, F in one common scalar domain.

    Either SqrtExt elements over a system's frame (constructed systems)
    or free jet towers over the q-frame (identity checks); all the
    formula helpers below accept both.
    """

    __slots__ = ("E", "W", "F")

    def __init__(self, E, W, F):
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "F", F)

    def __setattr__(self, *_):
        raise AttributeError("QSpaceFunctions is immutable")

    def unpack(self):
        return self.E, self.W, self.F


def qspace_functions(sys):
    """E, W, F of a constructed system over s = z'(q).

    E is the log-derivative of z', F the chain image of f'''/f'' and W
    the rescaled drift -Q/z'; each carries an odd s-component only.
    """
    if sys.A.is_zero():
        raise DegenerateSystemError(
            "leading coefficient vanishes identically: z'(q) would be zero")
    two_a = 2 * sys.A
    zero = rde_zero(sys.frame)
    return QSpaceFunctions(
        E=SqrtExt(zero, sys.A.derive() / two_a, two_a),
        W=SqrtExt(zero, -sys.Q / two_a, two_a),
        F=SqrtExt(zero, sys.f[3] / sys.f[2], two_a),
    )


def free_qspace_functions(constants=(), budget=DEFAULT_BUDGET):
    """E, W, F as unconstrained jet towers of the physical variable."""
    fr = q_frame(constants=constants, budget=budget)
    return QSpaceFunctions(
        E=as_rde(fr.sym("E"), fr),
        W=as_rde(fr.sym("W"), fr),
        F=as_rde(fr.sym("F"), fr),
    )


def potentials(E, W, F):
    """Potential pair determined by the gauge functions.

    The two signs differ by the exact derivative term (3W' - F')/2;
    returned as a dict with keys "plus" and "minus".
    """
    dE, dW, dF = E.derive(), W.derive(), F.derive()
    base = (
        W * W * Fraction(1, 2)
        - (2 * dE - E * E) * Fraction(1, 3)
        - (2 * dF + 2 * W * F - 2 * E * F - F * F) * Fraction(1, 6)
    )
    skew = (3 * dW - dF) * Fraction(1, 2)
    return {"plus": base + skew, "minus": base - skew}


def condition_residuals(E, W, F):
    """Residuals of the two differential constraints on E, W, F.

    Built from the auxiliary combinations

        g1 = W' + E W - (F' - 2 W F + 2 E F + F^2)/4,
        g2 = E' + E^2 + (F' - 2 W F + 2 E F + F^2)/2;

    the first residual applies (d - E) to g1' and the second a pair of
    shifted derivations to g2'.  Both vanish identically exactly when
    the functions come from a constructed system.  Keys: "second_order"
    and "third_order".
    """
    dE, dW, dF = E.derive(), W.derive(), F.derive()
    mixed = dF - 2 * W * F + 2 * E * F + F * F
    g1 = dW + E * W - mixed * Fraction(1, 4)
    g2 = dE + E * E + mixed * Fraction(1, 2)
    dg1, dg2 = g1.derive(), g2.derive()
    combo = dg1 - dg2 * Fraction(1, 6)
    r2 = dg1.derive() - E * dg1 - F * combo * Fraction(1, 2)
    inner = dg2.derive() - E * dg2
    r3 = (
        inner.derive()
        - (2 * E + F * Fraction(3, 2)) * inner
        + (2 * dF - 2 * E * F - F * F) * combo * Fraction(3, 2)
    )
    return {"second_order": r2, "third_order": r3}


def invariants(E, W, F):
    """The three frame-independent combinations of the gauge functions.

    The first is linear, the second quadratic and the third cubic in
    the jets; W enters the first alone.
    """
    dE, dF = E.derive(), F.derive()
    i1 = W - F * Fraction(1, 3)
    i2 = 2 * dE + dF - E * E - E * F - F * F * Fraction(1, 3)
    i3 = (
        dF.derive()
        - dE * F
        - 3 * E * dF
        - 2 * F * dF
        + 2 * E * E * F
        + 2 * E * F * F
        + F * F * F * Fraction(4, 9)
    )
    return i1, i2, i3


# ---------------------------------------------------------------------------
# The supercharge, the Hamiltonians, and the reconstruction identities.


def supercharge_factored(E, W, F):
    """(d + W - E - F)(d + W)(d + W + E), expanded."""
    d = LinearDiffOperator.derivative(E.frame)
    mult = LinearDiffOperator.multiplication
    return compose(d + mult(W - E - F), compose(d + mult(W), d + mult(W + E)))


def supercharge_from_invariants(i1, i2, i3):
    """Third-order operator rebuilt from the three invariants alone."""
    di1 = i1.derive()
    c2 = 3 * i1
    c1 = 3 * di1 + 3 * i1 * i1 + i2
    c0 = (
        di1.derive()
        + 3 * i1 * di1
        + i1 * i1 * i1
        + i1 * i2
        + i2.derive() * Fraction(1, 2)
        - i3 * Fraction(1, 6)
    )
    return LinearDiffOperator((c0, c1, c2, rde_one(i1.frame)))


def potential_from_invariants(i1, i2):
    """Potential pair rebuilt from the first two invariants."""
    base = i1 * i1 * Fraction(1, 2) - i2 * Fraction(1, 3)
    skew = i1.derive() * Fraction(3, 2)
    return {"plus": base + skew, "minus": base - skew}


def hamiltonian_pair(E, W, F):
    """-(1/2) d^2 + V for both potential signs."""
    v = potentials(E, W, F)
    frame = E.frame
    zero = rde_zero(frame)
    half = as_rde(frame.const(Fraction(-1, 2)), frame)
    return {s: LinearDiffOperator((v[s], zero, half)) for s in ("plus", "minus")}


def intertwining_residual(E, W, F):
    """P H_minus - H_plus P with the determined potentials.

    For unconstrained gauge functions the potentials cancel every
    coefficient of order >= 2, leaving a first-order operator whose two
    coefficients are explicit combinations of the constraint residuals
    (see verify_intertwining_shape); for the functions of a constructed
    system those constraints hold and the residual vanishes entirely.
    """
    p = supercharge_factored(E, W, F)
    h = hamiltonian_pair(E, W, F)
    return compose(p, h["minus"]) - compose(h["plus"], p)


def verify_intertwining_shape(E, W, F):
    """The residual reduces exactly to the two constraint residuals.

    With r2, r3 the second- and third-order constraint residuals, the
    intertwining residual equals

        (-2 r2) d + (-r2' + (F/2 - 2W) r2 - r3/6)

    identically, with no constraint imposed on E, W, F.  In particular
    no coefficient of order >= 2 survives, and both surviving
    coefficients lie in the differential ideal generated by the
    constraints, so vanishing of r2 and r3 is equivalent to the
    intertwining relation.
    """
    res = intertwining_residual(E, W, F)
    cr = condition_residuals(E, W, F)
    r2, r3 = cr["second_order"], cr["third_order"]
    for k in range(2, res.order + 1):
        c = res.coefficient(k)
        if not c.is_zero():
            return CheckResult(
                "intertwining-shape", False,
                residual=f"order-{k} coefficient: {c!r}")
    want1 = r2 * Fraction(-2)
    if res.order >= 1:
        want1 = res.coefficient(1) - want1
    if not want1.is_zero():
        return CheckResult(
            "intertwining-shape", False,
            residual="order-1 coefficient is not -2*r2")
    want0 = (F * Fraction(1, 2) - W * 2) * r2 - r2.derive() - r3 * Fraction(1, 6)
    if res.order >= 0:
        want0 = res.coefficient(0) - want0
    if not want0.is_zero():
        return CheckResult(
            "intertwining-shape", False,
            residual="scalar part is not -r2' + (F/2 - 2W) r2 - r3/6")
    return CheckResult("intertwining-shape", True)


def verify_intertwining(sys):
    """Full vanishing of the intertwining residual for one system."""
    qs = qspace_functions(sys)
    res = intertwining_residual(qs.E, qs.W, qs.F)
    if res.is_zero():
        return CheckResult("intertwining", True)
    return CheckResult("intertwining", False, residual=format_operator(res))


def verify_conditions(sys):
    """Both constraint residuals vanish for the system's gauge functions."""
    qs = qspace_functions(sys)
    res = condition_residuals(qs.E, qs.W, qs.F)
    bad = sorted(k for k, v in res.items() if not v.is_zero())
    if bad:
        return CheckResult("conditions", False, residual=f"nonzero: {', '.join(bad)}")
    return CheckResult("conditions", True)


# ---------------------------------------------------------------------------
# Shifts of the first-order supercharge factors under a change of frame.


def factor_shift_brackets(triple):
    """The three w-functions multiplying dw/dq in factor_shifts."""
    lphi = logd(triple.phi1)
    lw21 = logd(triple.w21)
    return (-lw21, lw21 - lphi, lphi)


def factor_shifts(triple):
    """Scalar shifts of the three first-order supercharge factors.

    Under the change of frame each factor picks up a multiple of dw/dq:
    minus the log-derivative of the pair Wronskian on the first factor,
    the difference with the log-derivative of phi1 on the second, and
    the phi1 term alone on the third.  They telescope to zero, matching
    the invariance of the full third-order product.
    """
    fr = triple.frame
    constants = tuple(sorted(n for n, (kind, _) in fr.rules.items() if kind == CONST))
    qfr = qw_frame(constants=constants, formal_phi="phi1" in fr.rules,
                   budget=fr.budget)
    dw = as_rde(qfr.jet("w", 1), qfr)
    return tuple(b.reframe(qfr) * dw for b in factor_shift_brackets(triple))
