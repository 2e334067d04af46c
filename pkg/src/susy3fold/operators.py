"""Linear ordinary differential operators with exact scalar coefficients.

An operator is a finite sum sum_k c_k d^k where d differentiates along
the coefficients' frame and each c_k is an RDE or a SqrtExt element.
Operators are stored expanded in standard form (coefficient list, lowest
order first) so that equality is structural.

A detached prefactor s^m (s the square root adjoined by SqrtExt, so
s^2 = 2A) can ride along in ``scalar_power``.  It is bookkeeping only:
composition adds the exponents and none of the operations move the
prefactor through a derivative.  Callers that need the prefactor folded
into coefficients use :meth:`LinearDiffOperator.resolve_prefactor`.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .diffalg import (
    DiffPolynomial,
    FrameError,
    RDE,
    SqrtExt,
    as_rde,
    rde_zero,
    substitute_rde,
    format_rde,
)


def _is_scalar(x):
    return isinstance(x, (RDE, SqrtExt))


def _coerce_scalar(x, frame):
    if isinstance(x, (RDE, SqrtExt)):
        return x
    if isinstance(x, (int, Fraction, DiffPolynomial)):
        return as_rde(x, frame)
    raise TypeError(f"cannot use {type(x).__name__} as an operator coefficient")


def _find_extension(coeffs):
    for c in coeffs:
        if isinstance(c, SqrtExt):
            return c.two_a
    return None


def _unify(coeffs):
    """Lift every coefficient into a common scalar domain."""
    two_a = _find_extension(coeffs)
    if two_a is None:
        return tuple(coeffs)
    return tuple(SqrtExt.lift(c, two_a) for c in coeffs)


class LinearDiffOperator:
    __slots__ = ("coeffs", "scalar_power")

    def __init__(self, coeffs, scalar_power=0):
        coeffs = list(coeffs)
        if not all(_is_scalar(c) for c in coeffs):
            raise TypeError("coefficients must be RDE or SqrtExt scalars")
        frames = {c.frame for c in coeffs}
        if len(frames) > 1:
            raise FrameError("operator coefficients live in different frames")
        while coeffs and coeffs[-1].is_zero():
            coeffs.pop()
        object.__setattr__(self, "coeffs", _unify(coeffs))
        object.__setattr__(self, "scalar_power", scalar_power)

    def __setattr__(self, *_):
        raise AttributeError("LinearDiffOperator is immutable")

    # -- constructors ----------------------------------------------------

    @staticmethod
    def zero(frame):
        return LinearDiffOperator(())

    @staticmethod
    def identity(frame):
        return LinearDiffOperator((as_rde(frame.one(), frame),))

    @staticmethod
    def derivative(frame, order=1):
        coeffs = [rde_zero(frame)] * order + [as_rde(frame.one(), frame)]
        return LinearDiffOperator(coeffs)

    @staticmethod
    def multiplication(scalar):
        if not _is_scalar(scalar):
            raise TypeError("multiplication operator needs an RDE or SqrtExt")
        return LinearDiffOperator((scalar,))

    # -- structure ---------------------------------------------------------

    def is_zero(self):
        return not self.coeffs

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def frame(self):
        if not self.coeffs:
            return None
        return self.coeffs[0].frame

    def coefficient(self, k):
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        raise IndexError(f"no coefficient of order {k}")

    def __eq__(self, other):
        if not isinstance(other, LinearDiffOperator):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return True
        return (
            self.scalar_power == other.scalar_power
            and len(self.coeffs) == len(other.coeffs)
            and all(a == b for a, b in zip(self.coeffs, other.coeffs))
        )

    def __hash__(self):
        return hash((self.coeffs, self.scalar_power))

    def __repr__(self):
        return f"LinearDiffOperator({format_operator(self)})"

    def _frame_for(self, other):
        f = self.frame or other.frame
        if f is None:
            raise FrameError("cannot infer frame from two zero operators")
        return f

    # -- linear structure ---------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, LinearDiffOperator):
            return NotImplemented
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.scalar_power != other.scalar_power:
            raise ValueError("cannot add operators with different prefactors")
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        frame = self._frame_for(other)
        z = rde_zero(frame)
        out = []
        for k in range(n):
            ck = a[k] if k < len(a) else z
            dk = b[k] if k < len(b) else z
            out.append(ck + dk)
        return LinearDiffOperator(out, self.scalar_power)

    def __neg__(self):
        return LinearDiffOperator([-c for c in self.coeffs], self.scalar_power)

    def __sub__(self, other):
        if not isinstance(other, LinearDiffOperator):
            return NotImplemented
        return self + (-other)

    def scale(self, scalar):
        """Left multiplication by a scalar function (or number)."""
        frame = self.frame
        if frame is None:
            return self
        s = _coerce_scalar(scalar, frame)
        return LinearDiffOperator([s * c for c in self.coeffs], self.scalar_power)

    def __mul__(self, other):
        if isinstance(other, LinearDiffOperator):
            return compose(self, other)
        return compose(self, LinearDiffOperator.multiplication(
            _coerce_scalar(other, self.frame)))

    def __rmul__(self, other):
        # scalar * P is plain coefficient scaling
        return self.scale(other)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("operator powers must be non-negative integers")
        frame = self.frame
        if frame is None:
            raise ValueError("cannot raise the zero operator to a power")
        result = LinearDiffOperator.identity(frame)
        base = self
        while n:
            if n & 1:
                result = compose(result, base)
            n >>= 1
            if n:
                base = compose(base, base)
        return result

    # -- action ---------------------------------------------------------------

    def apply(self, u):
        """Apply the differential part to a scalar.

        The detached prefactor is not included; it never vanishes, so
        kernel statements are unaffected.
        """
        frame = self.frame
        if frame is None:
            raise ValueError("zero operator has no frame; coerce u yourself")
        u = _coerce_scalar(u, frame)
        two_a = _find_extension(self.coeffs)
        if two_a is not None:
            u = SqrtExt.lift(u, two_a)
        elif isinstance(u, SqrtExt):
            pass  # coefficients will lift termwise below
        total = None
        du = u
        for k, c in enumerate(self.coeffs):
            if k:
                du = du.derive()
            term = c * du
            total = term if total is None else total + term
        return total

    def resolve_prefactor(self, two_a):
        """Fold the detached s^m into the coefficients using s^2 = 2A.

        Even powers stay rational; odd powers need SqrtExt coefficients.
        """
        m = self.scalar_power
        if m == 0:
            return self
        frame = self.frame
        if frame is None:
            return LinearDiffOperator((), 0)
        odd = m % 2
        factor = two_a ** ((m - odd) // 2)  # s^m = s^odd (2A)^((m-odd)/2)
        if odd:
            scalar = SqrtExt.s(two_a) * SqrtExt.lift(factor, two_a)
        else:
            scalar = factor
        return LinearDiffOperator([scalar * c for c in self.coeffs], 0)

    def without_prefactor(self):
        return LinearDiffOperator(self.coeffs, 0)

    def with_prefactor(self, m):
        return LinearDiffOperator(self.coeffs, self.scalar_power + m)


def compose(p, q):
    """Operator composition p after q, expanded by the Leibniz rule."""
    if p.is_zero() or q.is_zero():
        return LinearDiffOperator((), p.scalar_power + q.scalar_power)
    if p.frame != q.frame:
        raise FrameError("composing operators over different frames")
    frame = p.frame
    pc = _unify(tuple(p.coeffs) + tuple(q.coeffs))
    pcoeffs, qcoeffs = pc[: len(p.coeffs)], pc[len(p.coeffs) :]
    n = len(pcoeffs) - 1
    # derivatives of q's coefficients up to the order of p
    derivs = [list(qcoeffs)]
    for _ in range(n):
        derivs.append([c.derive() for c in derivs[-1]])
    zero = pcoeffs[0] - pcoeffs[0]
    out = [zero] * (len(pcoeffs) + len(qcoeffs) - 1)
    for j, cj in enumerate(pcoeffs):
        if cj.is_zero():
            continue
        for i in range(j + 1):
            binom = math.comb(j, i)
            row = derivs[i]
            for k, e in enumerate(row):
                if e.is_zero():
                    continue
                out[k + j - i] = out[k + j - i] + cj * e * binom
    return LinearDiffOperator(out, p.scalar_power + q.scalar_power)


def transpose(p):
    """Formal transpose: sum_k (-d)^k . c_k, expanded."""
    if p.scalar_power:
        raise ValueError("transpose of an operator with a detached prefactor")
    if p.is_zero():
        return p
    coeffs = p.coeffs
    derivs = {}
    zero = coeffs[0] - coeffs[0]
    out = [zero] * len(coeffs)
    for k, c in enumerate(coeffs):
        if c.is_zero():
            continue
        dc = c
        for i in range(k + 1):
            if i:
                dc = dc.derive()
            m = k - i
            sign = -1 if k % 2 else 1
            out[m] = out[m] + dc * (sign * math.comb(k, i))
    return LinearDiffOperator(out)


def pullback(p, images, dbase_inv, gauge):
    """Conjugated change of variable: gauge . (p o substitution) . gauge^-1.

    ``images`` maps each jet of p's frame to an RDE in the new frame,
    ``dbase_inv`` is (d(old base)/d(new base))^-1 as a function of the
    new base, and ``gauge`` is the conjugating scalar (pass 1 for none).
    """
    if p.scalar_power:
        raise ValueError("pullback of an operator with a detached prefactor")
    if p.is_zero():
        return p
    frame = dbase_inv.frame
    gauge = _coerce_scalar(gauge, frame)
    d_new = LinearDiffOperator.derivative(frame)
    d_old = compose(LinearDiffOperator.multiplication(dbase_inv), d_new)
    result = LinearDiffOperator.zero(frame)
    power = LinearDiffOperator.identity(frame)
    for k, c in enumerate(p.coeffs):
        if k:
            power = compose(power, d_old)
        if isinstance(c, SqrtExt):
            raise TypeError("pullback expects rational coefficients")
        c_new = substitute_rde(c, images)
        if not c_new.is_zero():
            result = result + compose(LinearDiffOperator.multiplication(c_new), power)
    if gauge == as_rde(frame.one(), frame):
        return result
    inv = LinearDiffOperator.multiplication(1 / gauge)
    return compose(compose(LinearDiffOperator.multiplication(gauge), result), inv)


def format_operator(op, latex=False):
    if op.is_zero():
        return "0"
    d = "d" if not latex else r"\partial"
    parts = []
    for k in range(op.order, -1, -1):
        c = op.coeffs[k]
        if c.is_zero():
            continue
        if isinstance(c, SqrtExt):
            cs = f"({format_rde(c.even, latex)}) + ({format_rde(c.odd, latex)})*s"
            cs = f"[{cs}]"
        else:
            cs = format_rde(c, latex)
            if any(ch in cs for ch in "+- ") and k > 0:
                cs = f"({cs})"
        if k == 0:
            parts.append(cs)
        else:
            dk = d if k == 1 else (f"{d}^{k}" if not latex else f"{d}^{{{k}}}")
            if cs == "1":
                parts.append(dk)
            elif cs == "-1":
                parts.append(f"-{dk}")
            else:
                parts.append(f"{cs}*{dk}" if not latex else f"{cs} {dk}")
    body = parts[0]
    for piece in parts[1:]:
        if piece.startswith("-"):
            body += " - " + piece[1:]
        else:
            body += " + " + piece
    if op.scalar_power:
        return f"s^{op.scalar_power}*({body})" if not latex else rf"s^{{{op.scalar_power}}}\left({body}\right)"
    return body
