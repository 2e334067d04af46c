"""Exact arithmetic kernel: differential polynomials and rational expressions.

Scalars are built from *jet variables*: a jet is a pair ``(name, order)``
standing for the order-th derivative of a named indeterminate.  A
:class:`Frame` fixes how the derivation acts on each declared name
(constant, base variable, or derivative tower with an optional chain-rule
multiplier).  Because a monomial is just a dict of jets, the same term
data can be reinterpreted in a different frame (z-space, w-space,
q-space) without rewriting, which is how chain-rule bookkeeping between
spaces stays exact.

All values are immutable after construction and all operations are pure.
Coefficients are ``fractions.Fraction`` throughout; nothing here ever
touches floating point.
"""

from __future__ import annotations

import heapq
import math
import random
from fractions import Fraction
from functools import cmp_to_key

DEFAULT_BUDGET = 6

# Rule kinds for Frame.rules values.
CONST = "const"
BASE = "base"
JET = "jet"


class FrameError(ValueError):
    """Operand frames disagree, or a jet is not declared in the frame."""


class BudgetError(ValueError):
    """A derivation would exceed the frame's jet-order budget."""


class SubstitutionError(ValueError):
    """A substitution target is not expressible in the requested frame."""


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


# ---------------------------------------------------------------------------
# Monomials.
#
# A monomial is a tuple of ((name, order), exponent) pairs sorted by jet.
# The empty tuple is the monomial 1.  Order: degree-lexicographic, with
# jets compared by (name, order) and the lexicographically smallest jet
# the most significant.

MONO_ONE = ()


def mono_degree(mono):
    return sum(e for _, e in mono)


def mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    out = []
    i = j = 0
    n1, n2 = len(m1), len(m2)
    while i < n1 and j < n2:
        v1, e1 = m1[i]
        v2, e2 = m2[j]
        if v1 == v2:
            out.append((v1, e1 + e2))
            i += 1
            j += 1
        elif v1 < v2:
            out.append(m1[i])
            i += 1
        else:
            out.append(m2[j])
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out)


def mono_cmp(m1, m2):
    """Degree-lexicographic comparison; returns -1, 0 or 1."""
    d1, d2 = mono_degree(m1), mono_degree(m2)
    if d1 != d2:
        return -1 if d1 < d2 else 1
    i = j = 0
    n1, n2 = len(m1), len(m2)
    while i < n1 or j < n2:
        v1 = m1[i][0] if i < n1 else None
        v2 = m2[j][0] if j < n2 else None
        if v1 == v2:
            e1, e2 = m1[i][1], m2[j][1]
            if e1 != e2:
                return 1 if e1 > e2 else -1
            i += 1
            j += 1
        elif v2 is None or (v1 is not None and v1 < v2):
            return 1  # m1 has a more significant jet with positive exponent
        else:
            return -1
    return 0


_MONO_KEY = cmp_to_key(mono_cmp)


def _mono_heap_key(mono):
    """Key sorting the deglex-largest monomial first (for min-heaps and
    min()); agrees with mono_cmp on every pair."""
    return (-mono_degree(mono), tuple((v, -e) for v, e in mono))


# ---------------------------------------------------------------------------
# Frames.


class Frame:
    """A named derivation acting on a set of declared jet families.

    ``rules`` maps an indeterminate name to one of

    * ``(CONST, None)``   -- derivative 0 (symbolic parameters),
    * ``(BASE, None)``    -- the frame's own variable (derivative 1),
    * ``(JET, None)``     -- derivative tower: d(name, k) = (name, k+1),
    * ``(JET, m)``        -- chain rule: d(name, k) = (name, k+1) * (m, 1).
    """

    __slots__ = ("label", "base", "rules", "budget", "_hash", "_djet")

    def __init__(self, label, rules, budget=DEFAULT_BUDGET):
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "rules", dict(rules))
        base = None
        for name, (kind, mult) in self.rules.items():
            if kind == BASE:
                base = name
            if mult is not None and mult not in self.rules:
                raise FrameError(f"chain multiplier {mult!r} undeclared in frame {label!r}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "budget", budget)
        object.__setattr__(self, "_hash", hash((label, tuple(sorted(self.rules.items())), budget)))
        object.__setattr__(self, "_djet", {})

    def __setattr__(self, *_):
        raise AttributeError("Frame is immutable")

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, Frame)
            and self.label == other.label
            and self.rules == other.rules
            and self.budget == other.budget
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Frame({self.label!r}, d/d{self.base or self.label})"

    # -- constructors -------------------------------------------------

    def zero(self):
        return DiffPolynomial(self, {})

    def one(self):
        return DiffPolynomial(self, {MONO_ONE: Fraction(1)})

    def const(self, x):
        c = _as_fraction(x)
        return DiffPolynomial(self, {MONO_ONE: c} if c else {})

    def jet(self, name, order=0):
        rule = self.rules.get(name)
        if rule is None:
            raise FrameError(f"jet {name!r} undeclared in frame {self.label!r}")
        kind = rule[0]
        if kind == CONST and order > 0:
            raise FrameError(f"{name!r} is a constant in frame {self.label!r}")
        if kind == BASE and order > 0:
            raise FrameError(f"{name!r} is the base variable of frame {self.label!r}")
        if order > self.budget:
            raise BudgetError(
                f"jet ({name!r}, {order}) exceeds budget {self.budget} of frame {self.label!r}"
            )
        return DiffPolynomial(self, {(((name, order), 1),): Fraction(1)})

    def sym(self, name):
        return self.jet(name, 0)

    def with_budget(self, budget):
        return Frame(self.label, self.rules, budget)

    def with_constants(self, *names):
        rules = dict(self.rules)
        for n in names:
            rules.setdefault(n, (CONST, None))
        return Frame(self.label, rules, self.budget)

    # -- derivation ---------------------------------------------------

    def derive_jet(self, jv):
        """Return d(jv) as a DiffPolynomial, or None when it is zero."""
        cached = self._djet.get(jv)
        if cached is not None:
            return cached if cached is not _DJET_ZERO else None
        name, order = jv
        rule = self.rules.get(name)
        if rule is None:
            raise FrameError(f"jet {name!r} undeclared in frame {self.label!r}")
        kind, mult = rule
        if kind == CONST:
            self._djet[jv] = _DJET_ZERO
            return None
        if kind == BASE:
            out = self.one()
        else:
            if order + 1 > self.budget:
                raise BudgetError(
                    f"derivative of ({name!r}, {order}) exceeds budget "
                    f"{self.budget} of frame {self.label!r}"
                )
            if mult is None:
                out = self.jet(name, order + 1)
            else:
                out = self.jet(name, order + 1) * self.jet(mult, 1)
        self._djet[jv] = out
        return out

    def declares(self, jv):
        name, order = jv
        rule = self.rules.get(name)
        if rule is None:
            return False
        if rule[0] in (CONST, BASE):
            return order == 0
        return order <= self.budget


_DJET_ZERO = object()


def z_frame(constants=(), budget=DEFAULT_BUDGET):
    """Gauged z-space: base variable z, f a derivative tower in z."""
    rules = {"z": (BASE, None), "f": (JET, None)}
    for n in constants:
        rules[n] = (CONST, None)
    return Frame("z", rules, budget)


def w_frame(constants=(), formal_phi=False, budget=DEFAULT_BUDGET):
    """Transformed w-space: base variable w, f (and optionally the frame
    functions phi1..phi3) derivative towers in w."""
    rules = {"w": (BASE, None), "f": (JET, None)}
    if formal_phi:
        rules["phi1"] = (JET, None)
        rules["phi2"] = (JET, None)
        rules["phi3"] = (JET, None)
    for n in constants:
        rules[n] = (CONST, None)
    return Frame("w", rules, budget)


def q_frame(constants=(), budget=DEFAULT_BUDGET):
    """Physical q-space over z: z(q) a free tower, f chained through z,
    and E, W, F free derivative towers in q."""
    rules = {
        "z": (JET, None),
        "f": (JET, "z"),
        "E": (JET, None),
        "W": (JET, None),
        "F": (JET, None),
    }
    for n in constants:
        rules[n] = (CONST, None)
    return Frame("q", rules, budget)


def qw_frame(constants=(), formal_phi=False, budget=DEFAULT_BUDGET):
    """Physical q-space over w: w(q) a free tower, f and the frame
    functions chained through w, and E, W, F free towers in q.

    Shares jet names with :func:`w_frame`, so a polynomial computed in
    the w-frame (a pure function of w) can be reframed here and then
    picks up the correct w'(q) chain factors under the q-derivation.
    """
    rules = {
        "w": (JET, None),
        "f": (JET, "w"),
        "E": (JET, None),
        "W": (JET, None),
        "F": (JET, None),
    }
    if formal_phi:
        rules["phi1"] = (JET, "w")
        rules["phi2"] = (JET, "w")
        rules["phi3"] = (JET, "w")
    for n in constants:
        rules[n] = (CONST, None)
    return Frame("qw", rules, budget)


# ---------------------------------------------------------------------------
# Differential polynomials.


class DiffPolynomial:
    __slots__ = ("frame", "terms", "_hash")

    def __init__(self, frame, terms):
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, *_):
        raise AttributeError("DiffPolynomial is immutable")

    # -- basics --------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def is_constant(self):
        return not self.terms or (len(self.terms) == 1 and MONO_ONE in self.terms)

    def constant_value(self):
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and MONO_ONE in self.terms:
            return self.terms[MONO_ONE]
        raise ValueError("polynomial is not constant")

    def variables(self):
        vs = set()
        for mono in self.terms:
            for jv, _ in mono:
                vs.add(jv)
        return vs

    def max_order(self, name=None):
        best = -1
        for mono in self.terms:
            for (n, k), _ in mono:
                if name is None or n == name:
                    best = max(best, k)
        return best

    def degree(self):
        if not self.terms:
            return -1
        return max(mono_degree(m) for m in self.terms)

    def degree_in(self, jv):
        d = 0
        for mono in self.terms:
            for v, e in mono:
                if v == jv:
                    d = max(d, e)
        return d

    def leading(self):
        """(monomial, coefficient) of the deglex-largest term."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        best = min(self.terms, key=_mono_heap_key)
        return best, self.terms[best]

    def __eq__(self, other):
        if isinstance(other, DiffPolynomial):
            return self.frame == other.frame and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == (self.frame.const(other)).terms
        return NotImplemented

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.frame, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def _check(self, other):
        if self.frame != other.frame:
            raise FrameError(f"frame mismatch: {self.frame!r} vs {other.frame!r}")

    # -- ring operations ------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.frame.const(other)
        elif not isinstance(other, DiffPolynomial):
            return NotImplemented
        self._check(other)
        if not self.terms:
            return other
        if not other.terms:
            return self
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            acc = terms.get(mono)
            if acc is None:
                terms[mono] = c
            else:
                acc = acc + c
                if acc:
                    terms[mono] = acc
                else:
                    del terms[mono]
        return DiffPolynomial(self.frame, terms)

    __radd__ = __add__

    def __neg__(self):
        return DiffPolynomial(self.frame, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.frame.const(other)
        elif not isinstance(other, DiffPolynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _as_fraction(other)
            if not c:
                return self.frame.zero()
            return DiffPolynomial(self.frame, {m: k * c for m, k in self.terms.items()})
        if not isinstance(other, DiffPolynomial):
            return NotImplemented
        self._check(other)
        if not self.terms or not other.terms:
            return self.frame.zero()
        # iterate over the smaller operand
        a, b = self.terms, other.terms
        if len(a) > len(b):
            a, b = b, a
        out = {}
        for m1, c1 in a.items():
            for m2, c2 in b.items():
                mono = mono_mul(m1, m2)
                c = c1 * c2
                acc = out.get(mono)
                if acc is None:
                    out[mono] = c
                else:
                    acc = acc + c
                    if acc:
                        out[mono] = acc
                    else:
                        del out[mono]
        return DiffPolynomial(self.frame, out)

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("polynomial powers must be non-negative integers")
        result = self.frame.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base_needed = n >> 1
            if base_needed:
                base = base * base
            n = base_needed
        return result

    # -- calculus --------------------------------------------------------

    def derive(self):
        frame = self.frame
        out = {}
        for mono, c in self.terms.items():
            for idx in range(len(mono)):
                jv, e = mono[idx]
                dj = frame.derive_jet(jv)
                if dj is None:
                    continue
                if e == 1:
                    rest = mono[:idx] + mono[idx + 1 :]
                else:
                    rest = mono[:idx] + ((jv, e - 1),) + mono[idx + 1 :]
                factor = c * e
                for m2, c2 in dj.terms.items():
                    mm = mono_mul(rest, m2)
                    cc = factor * c2
                    acc = out.get(mm)
                    if acc is None:
                        out[mm] = cc
                    else:
                        acc = acc + cc
                        if acc:
                            out[mm] = acc
                        else:
                            del out[mm]
        return DiffPolynomial(frame, out)

    def partial(self, jv):
        """Formal partial derivative with respect to a single jet."""
        out = {}
        for mono, c in self.terms.items():
            for idx in range(len(mono)):
                v, e = mono[idx]
                if v != jv:
                    continue
                if e == 1:
                    rest = mono[:idx] + mono[idx + 1 :]
                else:
                    rest = mono[:idx] + ((v, e - 1),) + mono[idx + 1 :]
                cc = c * e
                acc = out.get(rest)
                if acc is None:
                    out[rest] = cc
                else:
                    acc = acc + cc
                    if acc:
                        out[rest] = acc
                    else:
                        del out[rest]
        return DiffPolynomial(self.frame, out)

    def evaluate(self, point):
        """Evaluate at a map jet -> number; all jets must be assigned."""
        total = Fraction(0)
        for mono, c in self.terms.items():
            val = c
            for jv, e in mono:
                if jv not in point:
                    raise KeyError(f"no value for jet {jv}")
                val = val * _as_fraction(point[jv]) ** e
            total += val
        return total

    def reframe(self, frame):
        for jv in self.variables():
            if not frame.declares(jv):
                raise FrameError(f"jet {jv} undeclared in frame {frame.label!r}")
        return DiffPolynomial(frame, self.terms)

    def sorted_terms(self):
        """Terms in descending monomial order (deterministic output)."""
        return sorted(self.terms.items(), key=lambda kv: _MONO_KEY(kv[0]), reverse=True)

    def __repr__(self):
        return f"DiffPolynomial({format_poly(self)})"


# ---------------------------------------------------------------------------
# Content, primitive parts, division, GCD.


def _content(p):
    """Rational content: positive Fraction c with p/c integer, coprime."""
    num_gcd = 0
    den_lcm = 1
    for c in p.terms.values():
        num_gcd = math.gcd(num_gcd, abs(c.numerator))
        den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
    return Fraction(num_gcd, den_lcm)


def primitive(p):
    """Split p = content * pp with pp integer-coefficient, coprime, and
    positive deglex-leading coefficient (sign lives in the content)."""
    if not p.terms:
        return Fraction(0), p
    c = _content(p)
    _, lead = p.leading()
    if lead < 0:
        c = -c
    inv = 1 / c
    pp = DiffPolynomial(p.frame, {m: k * inv for m, k in p.terms.items()})
    return c, pp


def common_monomial(p):
    """The largest monomial dividing every term of p."""
    it = iter(p.terms)
    try:
        first = next(it)
    except StopIteration:
        return MONO_ONE
    common = dict(first)
    for mono in it:
        if not common:
            break
        md = dict(mono)
        for v in list(common):
            e = md.get(v, 0)
            if e == 0:
                del common[v]
            else:
                common[v] = min(common[v], e)
    return tuple(sorted(common.items()))


def mono_div(m1, m2):
    """m1 / m2, or None when not divisible."""
    if not m2:
        return m1
    out = []
    d2 = dict(m2)
    for v, e in m1:
        e2 = d2.pop(v, 0)
        if e2 > e:
            return None
        if e > e2:
            out.append((v, e - e2))
    if d2:
        return None
    return tuple(out)


def poly_div_mono(p, mono):
    if not mono:
        return p
    out = {}
    for m, c in p.terms.items():
        q = mono_div(m, mono)
        if q is None:
            raise ValueError("monomial does not divide polynomial")
        out[q] = c
    return DiffPolynomial(p.frame, out)


def poly_exact_div(p, d):
    """Exact multivariate division p / d, or None if it fails.

    Heap-ordered long division: the remainder lives in a mutable dict
    and a lazy max-heap tracks its deglex-largest monomial, so each
    reduction step costs O(|d| log |p|) instead of a full rescan.  A
    non-exact division fails on the first pop whose monomial the
    divisor's leading term does not divide.
    """
    if d.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    if p.is_zero():
        return p
    if d.is_constant():
        return p * (1 / d.constant_value())
    lm, lc = d.leading()
    dterms = list(d.terms.items())
    rem = dict(p.terms)
    heap = [(_mono_heap_key(m), m) for m in rem]
    heapq.heapify(heap)
    qterms = {}
    while heap:
        _, rm = heapq.heappop(heap)
        rc = rem.pop(rm, None)
        if rc is None:
            continue  # stale entry: already cancelled
        qm = mono_div(rm, lm)
        if qm is None:
            return None
        qc = rc / lc
        qterms[qm] = qterms.get(qm, Fraction(0)) + qc
        for dm, dc in dterms:
            if dm is lm or dm == lm:
                continue  # the leading term cancels rm by construction
            m2 = mono_mul(qm, dm)
            old = rem.get(m2)
            if old is None:
                rem[m2] = -qc * dc
                heapq.heappush(heap, (_mono_heap_key(m2), m2))
            else:
                newc = old - qc * dc
                if newc:
                    rem[m2] = newc
                else:
                    del rem[m2]
    return DiffPolynomial(p.frame, {m: c for m, c in qterms.items() if c})


def _split_by(p, jv):
    """View p as a univariate polynomial in jv: {exp: coefficient-poly}."""
    out = {}
    frame = p.frame
    for mono, c in p.terms.items():
        e = 0
        rest = []
        for v, k in mono:
            if v == jv:
                e = k
            else:
                rest.append((v, k))
        rest = tuple(rest)
        bucket = out.setdefault(e, {})
        bucket[rest] = bucket.get(rest, Fraction(0)) + c
    return {
        e: DiffPolynomial(frame, {m: c for m, c in bucket.items() if c})
        for e, bucket in out.items()
        if any(bucket.values())
    }


def _join_by(parts, jv, frame):
    terms = {}
    for e, coeff in parts.items():
        if coeff.is_zero():
            continue
        factor = ((jv, e),) if e else MONO_ONE
        for m, c in coeff.terms.items():
            mono = mono_mul(m, factor)
            terms[mono] = terms.get(mono, Fraction(0)) + c
    return DiffPolynomial(frame, {m: c for m, c in terms.items() if c})


def _univ_gcd(a, b):
    """Monic gcd of two univariate polynomials given as {exp: Fraction}."""

    def norm(u):
        return {e: c for e, c in u.items() if c}

    a, b = norm(a), norm(b)
    while b:
        da, db = max(a), max(b)
        if da < db:
            a, b = b, a
            continue
        # a -= lc(a)/lc(b) * x^(da-db) * b
        factor = a[da] / b[db]
        shift = da - db
        for e, c in b.items():
            k = e + shift
            a[k] = a.get(k, Fraction(0)) - factor * c
        a = norm(a)
        if not a:
            a, b = b, {}
            break
        if max(a) < db:
            a, b = b, a
    if not a:
        return {0: Fraction(1)}
    lead = a[max(a)]
    return {e: c / lead for e, c in a.items()}


_GCD_RNG = random.Random(0x5EED)


def _univ_image(p, jv, point):
    """Specialize all jets except jv at integer values -> {exp: Fraction}."""
    out = {}
    for mono, c in p.terms.items():
        e = 0
        val = c
        for v, k in mono:
            if v == jv:
                e = k
            else:
                val = val * Fraction(point[v]) ** k
        if val:
            out[e] = out.get(e, Fraction(0)) + val
    return {e: c for e, c in out.items() if c}


def _gcd_probably_trivial(p, q, shared):
    """Sound 'gcd is constant' certificate via univariate specializations.

    For each shared jet v we pick random integer values for the other
    jets.  If the specialization preserves the v-degree of p (checkable)
    then the v-degree of gcd(p, q) is bounded by the degree of the
    univariate gcd of the images; when that is zero for every shared v
    the multivariate gcd is a constant.  Degenerate points only ever
    force a retry, never a wrong answer.
    """
    others = (p.variables() | q.variables())
    for jv in shared:
        rest = [v for v in others if v != jv]
        proven = False
        for _ in range(6):
            point = {v: _GCD_RNG.randint(2, 101) for v in rest}
            pi = _univ_image(p, jv, point)
            if not pi or max(pi) != p.degree_in(jv):
                continue
            qi = _univ_image(q, jv, point)
            if not qi:
                continue
            g = _univ_gcd(pi, qi)
            if max(g) == 0:
                proven = True
                break
            return False  # plausible nontrivial gcd: use the exact path
        if not proven:
            return False
    return True


def _prem(a, b, jv):
    """Pseudo-remainder of a by b with respect to jv."""
    da, db = a.degree_in(jv), b.degree_in(jv)
    bs = _split_by(b, jv)
    lb = bs[db]
    frame = a.frame
    r = a
    while not r.is_zero():
        dr = r.degree_in(jv)
        if dr < db:
            break
        rs = _split_by(r, jv)
        lr = rs[dr]
        shift = ((jv, dr - db),) if dr > db else MONO_ONE
        shifted = DiffPolynomial(frame, {shift: Fraction(1)})
        r = r * lb - b * (lr * shifted)
    return r


def _gcd_recursive(p, q):
    """gcd of two nonzero primitive integer polynomials, primitive result."""
    if p.terms == q.terms:
        return p
    if p.is_constant() or q.is_constant():
        return p.frame.one()
    vp, vq = p.variables(), q.variables()
    shared = vp & vq
    if not shared:
        return p.frame.one()
    if _gcd_probably_trivial(p, q, shared):
        return p.frame.one()
    # choose the shared jet with the smallest maximal degree
    jv = min(shared, key=lambda v: (max(p.degree_in(v), q.degree_in(v)), v))
    a, b = p, q
    if a.degree_in(jv) < b.degree_in(jv):
        a, b = b, a
    asplit, bsplit = _split_by(a, jv), _split_by(b, jv)
    ac = _gcd_list(list(asplit.values()))
    bc = _gcd_list(list(bsplit.values()))
    app = poly_exact_div(a, ac)
    bpp = poly_exact_div(b, bc)
    cont = _gcd_recursive(ac, bc)
    # primitive subresultant-style PRS on the primitive parts
    while True:
        r = _prem(app, bpp, jv)
        if r.is_zero():
            g = bpp
            break
        if r.degree_in(jv) == 0:
            g = a.frame.one()
            break
        _, r = primitive(r)
        rsplit = _split_by(r, jv)
        rc = _gcd_list(list(rsplit.values()))
        r = poly_exact_div(r, rc)
        app, bpp = bpp, r
    _, g = primitive(g)
    if g.is_constant():
        return cont
    # the PRS can pick up extraneous content; keep only true divisors
    if poly_exact_div(a, g) is None or poly_exact_div(b, g) is None:
        gsplit = _split_by(g, jv)
        gc = _gcd_list(list(gsplit.values()))
        g = poly_exact_div(g, gc)
        if poly_exact_div(a, g) is None or poly_exact_div(b, g) is None:
            return cont
    return cont * g if not cont.is_constant() else g


def _gcd_list(polys):
    g = polys[0]
    _, g = primitive(g)
    for p in polys[1:]:
        if g.is_constant():
            break
        _, pp = primitive(p)
        g = _gcd_recursive(g, pp)
    return g


_COPRIME_CACHE = {}


def provably_coprime(p, q):
    """True only under a sound certificate that gcd(p, q) is constant.

    False means unknown, not necessarily a shared factor.  Used to keep
    alignment decisions cheap: callers fall back to exact paths when the
    certificate cannot be established.
    """
    if p.is_constant() or q.is_constant():
        return True
    shared = p.variables() & q.variables()
    if not shared:
        return True
    key = (p, q) if hash(p) <= hash(q) else (q, p)
    hit = _COPRIME_CACHE.get(key)
    if hit is None:
        hit = _gcd_probably_trivial(p, q, shared)
        if len(_COPRIME_CACHE) > 4096:
            _COPRIME_CACHE.clear()
        _COPRIME_CACHE[key] = hit
    return hit


def _atoms_pairwise_coprime(left, right):
    return all(
        provably_coprime(f, g) for f, _ in left for g, _ in right
    )


_GCD_CACHE = {}


def poly_gcd(p, q):
    """GCD in the polynomial ring; primitive with positive leading
    coefficient, or a constant 1 when coprime.  poly_gcd(0, q) = q."""
    if p.is_zero():
        return primitive(q)[1] if q.terms else q
    if q.is_zero():
        return primitive(p)[1]
    key = (p, q) if hash(p) <= hash(q) else (q, p)
    hit = _GCD_CACHE.get(key)
    if hit is not None:
        return hit
    mp, mq = common_monomial(p), common_monomial(q)
    shared_mono = _mono_min(mp, mq)
    pp = poly_div_mono(p, mp)
    qq = poly_div_mono(q, mq)
    _, pp = primitive(pp)
    _, qq = primitive(qq)
    g = _gcd_recursive(pp, qq)
    if shared_mono:
        g = g * DiffPolynomial(p.frame, {shared_mono: Fraction(1)})
    if len(_GCD_CACHE) > 4096:
        _GCD_CACHE.clear()
    _GCD_CACHE[key] = g
    return g


def _mono_min(m1, m2):
    d2 = dict(m2)
    out = []
    for v, e in m1:
        e2 = d2.get(v, 0)
        if e2:
            out.append((v, min(e, e2)))
    return tuple(out)


# ---------------------------------------------------------------------------
# Denominator factor bookkeeping.
#
# Ops on rational expressions keep a best-effort exact factorization of
# the denominator's primitive part.  Reductions then become exact
# divisions by known atoms instead of blind multivariate gcds, which is
# what makes products of Wronskian powers affordable.  The factorization
# is internal; the canonical num/den pair is unaffected by it.


def _atom_key(f):
    lead, _ = f.leading()
    return (f.degree(), len(f.terms), _MONO_KEY(lead),
            sorted(f.terms.items()))


def _sort_atoms(table):
    return tuple(sorted(table.items(), key=lambda kv: _atom_key(kv[0])))


def _merge_atoms(*groups):
    table = {}
    for group in groups:
        for f, e in group:
            table[f] = table.get(f, 0) + e
    return _sort_atoms(table)


def _atoms_product(atoms):
    if not atoms:
        return None
    out = None
    for f, e in atoms:
        p = f**e
        out = p if out is None else out * p
    return out


def _extract_common(a, atoms):
    """Pull every atom power dividing a out of a.

    Returns (left_atoms, a_reduced) with a / prod(atoms) equal to
    a_reduced / prod(left_atoms) and the two sides coprime.  Atoms need
    not be irreducible: one sharing only a proper factor with a is split
    and both parts re-examined, so granularity is refined, never lost.
    """
    out = []
    a_red = a
    work = list(atoms)
    while work:
        f, e = work.pop()
        hits = 0
        while hits < e:
            q = poly_exact_div(a_red, f)
            if q is None:
                break
            a_red = q
            hits += 1
        if hits == e:
            continue
        e -= hits
        if a_red.is_constant() or provably_coprime(a_red, f):
            out.append((f, e))
            continue
        g = poly_gcd(a_red, f)
        if g.is_constant():
            out.append((f, e))
            continue
        h = poly_exact_div(f, g)
        if h is None or h.is_constant():
            # g == f would mean the exact division above missed a
            # full factor; that breaks a kernel invariant
            raise RuntimeError("inconsistent factor extraction")
        work.append((g, e))
        work.append((h, e))
    return _merge_atoms(out), a_red


def _split_common_atoms(b_atoms, d_atoms):
    db = dict(b_atoms)
    common = []
    d_only = []
    for f, e in d_atoms:
        eb = db.get(f, 0)
        if eb:
            m = min(e, eb)
            common.append((f, m))
            if eb > m:
                db[f] = eb - m
            else:
                del db[f]
            if e > m:
                d_only.append((f, e - m))
        else:
            d_only.append((f, e))
    b_only = _sort_atoms(db)
    return tuple(common), b_only, tuple(d_only)


def _split_atom(f, e, h):
    out = [(h, e)]
    q = poly_exact_div(f, h)
    if not q.is_constant():
        out.append((q, e))
    return out


def _align_exclusive_atoms(b_only, d_only):
    """Refine two exclusive atom lists until no cross pair hides a factor.

    Splits any cross pair sharing a proper factor by its exact gcd; the
    side products are preserved.  On return every cross pair is either
    literally identical or coprime, so _split_common_atoms on the
    results yields a fully aligned decomposition.  Pair gcds stay at
    atom size, never at whole-denominator size.
    """
    b_work = list(b_only)
    d_work = list(d_only)
    restart = True
    while restart:
        restart = False
        for i, (f, ef) in enumerate(b_work):
            for j, (g, eg) in enumerate(d_work):
                if f.terms == g.terms or provably_coprime(f, g):
                    continue
                h = poly_gcd(f, g)
                if h.is_constant():
                    continue
                b_work[i:i + 1] = _split_atom(f, ef, h)
                d_work[j:j + 1] = _split_atom(g, eg, h)
                restart = True
                break
            if restart:
                break
    return b_work, d_work


def _cancel_or_extract(a, a_atoms, den_atoms):
    """Reduce a numerator against another operand's denominator atoms.

    Returns (a_reduced, a_left_atoms_or_None, den_left_atoms).  The
    structural path keeps the numerator factorization; when the two atom
    sets could hide a shared proper factor it degrades to divide-probing
    and the numerator hints are dropped.
    """
    if a_atoms is not None:
        common, a_only, d_only = _split_common_atoms(a_atoms, den_atoms)
        aligned = not (a_only and d_only) or _atoms_pairwise_coprime(
            a_only, d_only)
        if aligned:
            a_red = a
            for f, e in common:
                for _ in range(e):
                    a_red = poly_exact_div(a_red, f)
                    if a_red is None:  # stale hint; fall back to probing
                        break
                if a_red is None:
                    break
            if a_red is not None:
                return a_red, a_only, d_only
    left, a_red = _extract_common(a, den_atoms)
    return a_red, None, left


# ---------------------------------------------------------------------------
# Rational differential expressions.


class RDE:
    """Normalized quotient of differential polynomials.

    Canonical form: integer-coefficient numerator and denominator,
    coprime as polynomials, contents coprime as integers, positive
    deglex-leading denominator coefficient.  Equality of canonical forms
    is structural.
    """

    __slots__ = ("num", "den", "_dfac", "_nfac", "_dct", "_hash")

    def __init__(self, num, den, dfac=None, nfac=None):
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "_dfac", dfac)
        object.__setattr__(self, "_nfac", nfac)
        object.__setattr__(self, "_dct", None)
        object.__setattr__(self, "_hash", None)

    def _atoms(self):
        """Exact factorization of the denominator's primitive part."""
        atoms = self._dfac
        if atoms is None:
            _, ppd = primitive(self.den)
            atoms = () if ppd.is_constant() else ((ppd, 1),)
            object.__setattr__(self, "_dfac", atoms)
        return atoms

    def _den_content(self):
        c = self._dct
        if c is None:
            c, _ = primitive(self.den)
            object.__setattr__(self, "_dct", c)
        return c

    def _natoms(self):
        """Exact factorization of the numerator's primitive part."""
        atoms = self._nfac
        if atoms is None:
            _, ppn = primitive(self.num)
            atoms = () if ppn.is_constant() else ((ppn, 1),)
            object.__setattr__(self, "_nfac", atoms)
        return atoms

    def __setattr__(self, *_):
        raise AttributeError("RDE is immutable")

    @property
    def frame(self):
        return self.num.frame

    def is_zero(self):
        return self.num.is_zero()

    def __bool__(self):
        return bool(self.num)

    def is_constant(self):
        return self.num.is_constant() and self.den.is_constant()

    def constant_value(self):
        return self.num.constant_value() / self.den.constant_value()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, DiffPolynomial)):
            try:
                other = as_rde(other, self.frame)
            except FrameError:
                return False
        if not isinstance(other, RDE):
            return NotImplemented
        return (
            self.frame == other.frame
            and self.num.terms == other.num.terms
            and self.den.terms == other.den.terms
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.num, self.den))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return f"RDE({format_rde(self)})"

    # -- field operations ----------------------------------------------

    def __add__(self, other):
        other = as_rde(other, self.frame)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        a, b, c, d = self.num, self.den, other.num, other.den
        if b.terms == d.terms:
            return _reduce_build(a + c, self._den_content(), self._atoms())
        b_at, d_at = self._atoms(), other._atoms()
        common, b_only, d_only = _split_common_atoms(b_at, d_at)
        if b_only and d_only and not _atoms_pairwise_coprime(b_only, d_only):
            b_ref, d_ref = _align_exclusive_atoms(b_only, d_only)
            extra, b_only, d_only = _split_common_atoms(b_ref, d_ref)
            common = _merge_atoms(common, extra)
        cb, cd = self._den_content(), other._den_content()
        if not common:
            return _build(a * d + c * b, cb * cd,
                          _merge_atoms(b_only, d_only))
        pb = _atoms_product(b_only)
        pd = _atoms_product(d_only)
        t = a * cd if pd is None else a * pd * cd
        u = c * cb if pb is None else c * pb * cb
        common_left, t_red = _extract_common(t + u, common)
        return _build(t_red, cb * cd, _merge_atoms(common_left, b_only, d_only))

    __radd__ = __add__

    def __neg__(self):
        return RDE(-self.num, self.den, self._dfac, self._nfac)

    def __sub__(self, other):
        other = as_rde(other, self.frame)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = as_rde(other, self.frame)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return rde_zero(self.frame)
        a_red, a_left, d_left = _cancel_or_extract(
            self.num, self._nfac, other._atoms())
        c_red, c_left, b_left = _cancel_or_extract(
            other.num, other._nfac, self._atoms())
        nfac = None
        if a_left is not None and c_left is not None:
            nfac = _merge_atoms(a_left, c_left)
        return _build(
            a_red * c_red,
            self._den_content() * other._den_content(),
            _merge_atoms(b_left, d_left),
            nfac,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_rde(other, self.frame)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero():
            raise ZeroDivisionError("division by zero expression")
        return self * _inverse(other)

    def __rtruediv__(self, other):
        return as_rde(other, self.frame) / self

    def __pow__(self, n):
        if not isinstance(n, int):
            raise ValueError("powers must be integers")
        if n == 0:
            return rde_one(self.frame)
        if n < 0:
            if self.is_zero():
                raise ZeroDivisionError("zero to a negative power")
            return _inverse(self) ** (-n)
        if self.is_zero():
            return rde_zero(self.frame)
        atoms = tuple((f, e * n) for f, e in self._atoms())
        nfac = tuple((f, e * n) for f, e in self._natoms())
        return RDE(self.num**n, self.den**n, atoms, nfac)

    # -- calculus --------------------------------------------------------

    def derive(self):
        n, d = self.num, self.den
        if d.is_constant():
            return normalize(n.derive(), d)
        atoms = self._atoms()
        flist = [f for f, _ in atoms]
        radical = None
        s = self.frame.zero()
        for i, (f, e) in enumerate(atoms):
            term = f.derive() * e
            for j, g in enumerate(flist):
                if j != i:
                    term = term * g
            s = s + term
            radical = f if radical is None else radical * f
        num_raw = n.derive() * radical - n * s
        new_atoms = tuple((f, e + 1) for f, e in atoms)
        return _reduce_build(num_raw, self._den_content(), new_atoms)

    def evaluate(self, point):
        dv = self.den.evaluate(point)
        if not dv:
            raise ZeroDivisionError("denominator vanishes at evaluation point")
        return self.num.evaluate(point) / dv

    def reframe(self, frame):
        natoms, datoms = self._nfac, self._dfac
        if natoms is not None:
            natoms = tuple((f.reframe(frame), e) for f, e in natoms)
        if datoms is not None:
            datoms = tuple((f.reframe(frame), e) for f, e in datoms)
        return RDE(self.num.reframe(frame), self.den.reframe(frame),
                   datoms, natoms)


def _inverse(x):
    """Reciprocal of a nonzero canonical RDE, staying canonical."""
    cn, ppn = primitive(x.num)
    cd, ppd = primitive(x.den)
    r = cd / cn
    dfac = x._nfac
    if dfac is None:
        dfac = () if ppn.is_constant() else ((ppn, 1),)
    return RDE(ppd * r.numerator, ppn * r.denominator, dfac, x._dfac)


def _build(num, den_content, atoms, nfac=None):
    """Canonical RDE when num is known coprime to the atom product."""
    fr = num.frame
    if num.is_zero():
        return RDE(fr.zero(), fr.one(), (), ())
    cn, ppn = primitive(num)
    r = cn / den_content
    den_prim = _atoms_product(atoms)
    if den_prim is None:
        return RDE(ppn * r.numerator, fr.const(r.denominator), (), nfac)
    return RDE(ppn * r.numerator, den_prim * r.denominator, atoms, nfac)


def _reduce_build(num, den_content, atoms):
    """Canonical RDE: extract known den atoms from num, then build."""
    fr = num.frame
    if num.is_zero():
        return RDE(fr.zero(), fr.one(), (), ())
    left, num_red = _extract_common(num, atoms)
    return _build(num_red, den_content, left)


def rde_zero(frame):
    return RDE(frame.zero(), frame.one(), (), ())


def rde_one(frame):
    return RDE(frame.one(), frame.one(), (), ())


def as_rde(x, frame):
    if isinstance(x, RDE):
        if x.frame != frame:
            raise FrameError(f"frame mismatch: {x.frame!r} vs {frame!r}")
        return x
    if isinstance(x, DiffPolynomial):
        if x.frame != frame:
            raise FrameError(f"frame mismatch: {x.frame!r} vs {frame!r}")
        return normalize(x, frame.one())
    if isinstance(x, (int, Fraction)):
        c = _as_fraction(x)
        num = frame.const(c.numerator)
        den = frame.const(c.denominator)
        return RDE(num, den, (), ())
    return NotImplemented


def _normalize_coprime(num, den):
    """Finish normalization when num and den are known coprime."""
    if num.is_zero():
        return RDE(num.frame.zero(), num.frame.one(), (), ())
    cn, ppn = primitive(num)
    cd, ppd = primitive(den)
    r = cn / cd
    atoms = () if ppd.is_constant() else ((ppd, 1),)
    nfac = () if ppn.is_constant() else ((ppn, 1),)
    return RDE(ppn * r.numerator, ppd * r.denominator, atoms, nfac)


def normalize(num, den):
    """Canonical RDE from a numerator/denominator pair."""
    if den.is_zero():
        raise ZeroDivisionError("denominator is the zero polynomial")
    if num.frame != den.frame:
        raise FrameError("numerator and denominator frames differ")
    if num.is_zero():
        return RDE(num.frame.zero(), num.frame.one(), (), ())
    if den.is_constant():
        c = den.constant_value()
        return _normalize_coprime(num * (1 / c), num.frame.one())
    if num.terms == den.terms:
        return rde_one(num.frame)
    mn, md = common_monomial(num), common_monomial(den)
    shared = _mono_min(mn, md)
    if shared:
        num = poly_div_mono(num, shared)
        den = poly_div_mono(den, shared)
    g = poly_gcd(num, den)
    if not g.is_constant():
        num = poly_exact_div(num, g)
        den = poly_exact_div(den, g)
    return _normalize_coprime(num, den)


# -- equality with randomized-unequal fast path -------------------------


def _sample_point(variables, rng):
    return {v: rng.randint(2, 10**6) for v in variables}


def equal(a, b, seed=0xC0FFEE):
    """Exact equality of two expressions in the same frame.

    A randomized evaluation fast path may answer "unequal" early; an
    "equal" verdict always comes from the exact cross-multiplied test.
    """
    a = as_rde(a, a.frame if isinstance(a, (RDE, DiffPolynomial)) else b.frame)
    b = as_rde(b, a.frame)
    variables = (
        a.num.variables() | a.den.variables() | b.num.variables() | b.den.variables()
    )
    rng = random.Random(seed)
    for _ in range(3):
        point = _sample_point(variables, rng)
        try:
            va = a.num.evaluate(point) * b.den.evaluate(point)
            vb = b.num.evaluate(point) * a.den.evaluate(point)
        except ZeroDivisionError:  # pragma: no cover - integer points, no dens
            continue
        if va != vb:
            return False
    diff = a.num * b.den - b.num * a.den
    return diff.is_zero()


# ---------------------------------------------------------------------------
# Substitution.


def substitute_poly(p, images):
    """Substitute jets of p by RDE images (all in one common frame).

    ``images`` maps jets to RDEs; unmapped jets must be declared in the
    images' frame and pass through unchanged.  Evaluation is Horner-style
    in one mapped jet at a time to keep the rational arithmetic small.
    """
    if not images:
        raise SubstitutionError("empty substitution")
    target = next(iter(images.values())).frame
    mapped = sorted(jv for jv in p.variables() if jv in images)
    if not mapped:
        out = rde_zero(target)
        return out + p.reframe(target)
    jv = mapped[0]
    img = images[jv]
    parts = _split_by(p, jv)
    top = max(parts)
    acc = None
    for e in range(top, -1, -1):
        coeff = parts.get(e)
        if acc is None:
            acc = substitute_poly(coeff, images) if coeff is not None else rde_zero(target)
            continue
        acc = acc * img
        if coeff is not None:
            acc = acc + substitute_poly(coeff, images)
    return acc


def substitute_rde(x, images):
    n = substitute_poly(x.num, images)
    d = substitute_poly(x.den, images)
    if d.is_zero():
        raise SubstitutionError("substitution makes a denominator vanish")
    return n / d


def chain_images(family, base_image, dbase, max_order, extra=None):
    """Images for a derivative tower under a change of variable.

    (family, 0) maps to base_image and each further order divides the
    derivative of the previous image by ``dbase`` (the derivative of the
    old base variable in terms of the new one).
    """
    images = dict(extra or {})
    cur = base_image
    images[(family, 0)] = cur
    for k in range(1, max_order + 1):
        cur = cur.derive() / dbase
        images[(family, k)] = cur
    return images


def substitute_f(x, target):
    """Replace the formal f tower by derivatives of a concrete expression.

    ``target`` is an RDE in the frame's chain variable (z in the z- and
    q-frames, w in the w-frames).  Jets (f, k) become the k-th formal
    derivative of target with respect to that variable.
    """
    if isinstance(x, SqrtExt):
        return SqrtExt(
            substitute_f(x.even, target),
            substitute_f(x.odd, target),
            substitute_f(x.two_a, target),
        )
    frame = x.frame if isinstance(x, RDE) else x.frame
    rule = frame.rules.get("f")
    if rule is None:
        raise SubstitutionError(f"frame {frame.label!r} has no f tower")
    chain_var = rule[1] or frame.base
    if chain_var is None:
        raise SubstitutionError(f"frame {frame.label!r} has no chain variable for f")
    allowed = {(chain_var, 0)}
    bad = (target.num.variables() | target.den.variables()) - allowed
    if bad:
        raise SubstitutionError(
            f"f target must depend only on {chain_var!r}; found {sorted(bad)}"
        )
    if isinstance(x, DiffPolynomial):
        x = as_rde(x, frame)
    max_f = max(x.num.max_order("f"), x.den.max_order("f"))
    if max_f < 0:
        return x
    images = {}
    cur = target
    v = (chain_var, 0)
    for k in range(max_f + 1):
        images[("f", k)] = cur
        if k < max_f:
            cur = _partial_rde(cur, v)
    return substitute_rde(x, images)


def _partial_rde(x, jv):
    n, d = x.num, x.den
    if d.is_constant():
        return normalize(n.partial(jv), d)
    return normalize(n.partial(jv) * d - n * d.partial(jv), d * d)


def derivative_wrt(x, jv):
    """Formal derivative of an RDE with respect to one order-0 jet."""
    return _partial_rde(x, jv)


# ---------------------------------------------------------------------------
# Quadratic extension adjoining s with s^2 = 2A(z).


class SqrtExt:
    """Element even + odd*s of the extension by s, s^2 = 2A(z).

    Components are RDEs in the z-frame; the q-derivation encodes
    z' = s and z'' = A'(z):  d/dq (a + b s) = (2A b' + b A') + a' s.
    """

    __slots__ = ("even", "odd", "two_a")

    def __init__(self, even, odd, two_a):
        object.__setattr__(self, "even", even)
        object.__setattr__(self, "odd", odd)
        object.__setattr__(self, "two_a", two_a)

    def __setattr__(self, *_):
        raise AttributeError("SqrtExt is immutable")

    @property
    def frame(self):
        return self.even.frame

    def _check(self, other):
        if not isinstance(other, SqrtExt):
            raise TypeError("expected SqrtExt")
        if self.two_a != other.two_a:
            raise FrameError("mixing distinct quadratic extensions")

    def is_zero(self):
        return self.even.is_zero() and self.odd.is_zero()

    def __bool__(self):
        return not self.is_zero()

    def is_even(self):
        return self.odd.is_zero()

    def is_odd(self):
        return self.even.is_zero()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, RDE, DiffPolynomial)):
            other = self.lift(other, self.two_a)
        if not isinstance(other, SqrtExt):
            return NotImplemented
        return (
            self.even == other.even
            and self.odd == other.odd
            and self.two_a == other.two_a
        )

    def __hash__(self):
        return hash((self.even, self.odd, self.two_a))

    def __repr__(self):
        return f"SqrtExt(({format_rde(self.even)}) + ({format_rde(self.odd)})*s)"

    @staticmethod
    def lift(x, two_a):
        frame = two_a.frame
        if isinstance(x, SqrtExt):
            return x
        return SqrtExt(as_rde(x, frame), rde_zero(frame), two_a)

    @staticmethod
    def s(two_a):
        frame = two_a.frame
        return SqrtExt(rde_zero(frame), rde_one(frame), two_a)

    def __add__(self, other):
        if isinstance(other, (int, Fraction, RDE, DiffPolynomial)):
            other = self.lift(other, self.two_a)
        elif not isinstance(other, SqrtExt):
            return NotImplemented
        self._check(other)
        return SqrtExt(self.even + other.even, self.odd + other.odd, self.two_a)

    __radd__ = __add__

    def __neg__(self):
        return SqrtExt(-self.even, -self.odd, self.two_a)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, RDE, DiffPolynomial)):
            other = self.lift(other, self.two_a)
        elif not isinstance(other, SqrtExt):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, RDE, DiffPolynomial)):
            other = self.lift(other, self.two_a)
        elif not isinstance(other, SqrtExt):
            return NotImplemented
        self._check(other)
        a, b, c, d = self.even, self.odd, other.even, other.odd
        return SqrtExt(a * c + b * d * self.two_a, a * d + b * c, self.two_a)

    __rmul__ = __mul__

    def inverse(self):
        norm = self.even * self.even - self.odd * self.odd * self.two_a
        if norm.is_zero():
            raise ZeroDivisionError("non-invertible extension element")
        return SqrtExt(self.even / norm, -self.odd / norm, self.two_a)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, RDE, DiffPolynomial)):
            other = self.lift(other, self.two_a)
        elif not isinstance(other, SqrtExt):
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.lift(other, self.two_a) / self

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("SqrtExt powers must be non-negative integers")
        result = self.lift(1, self.two_a)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def derive(self):
        a, b = self.even, self.odd
        a_half = self.two_a * Fraction(1, 2)
        new_even = self.two_a * b.derive() + b * a_half.derive()
        return SqrtExt(new_even, a.derive(), self.two_a)


# ---------------------------------------------------------------------------
# Rendering.


def _jet_label(jv, latex=False):
    name, order = jv
    if latex:
        base = {
            "phi1": r"\varphi_1",
            "phi2": r"\varphi_2",
            "phi3": r"\varphi_3",
        }.get(name, name)
        if order == 0:
            return base
        if order <= 3:
            return base + "'" * order
        return base + f"^{{({order})}}"
    if order == 0:
        return name
    if order <= 3:
        return name + "'" * order
    return f"{name}^({order})"


def format_poly(p, latex=False):
    if not p.terms:
        return "0"
    chunks = []
    for mono, c in p.sorted_terms():
        factors = []
        for jv, e in mono:
            lbl = _jet_label(jv, latex)
            if e == 1:
                factors.append(lbl)
            elif latex:
                factors.append(f"{lbl}^{{{e}}}")
            else:
                factors.append(f"{lbl}^{e}")
        body = ("*" if not latex else " ").join(factors)
        if not body:
            piece = str(c) if not latex else _frac_latex(c)
        elif c == 1:
            piece = body
        elif c == -1:
            piece = "-" + body
        else:
            cs = str(c) if not latex else _frac_latex(c)
            piece = f"{cs}{'*' if not latex else ' '}{body}"
        chunks.append(piece)
    out = chunks[0]
    for piece in chunks[1:]:
        if piece.startswith("-"):
            out += " - " + piece[1:]
        else:
            out += " + " + piece
    return out


def _frac_latex(c):
    if c.denominator == 1:
        return str(c.numerator)
    sign = "-" if c < 0 else ""
    return rf"{sign}\frac{{{abs(c.numerator)}}}{{{c.denominator}}}"


def format_rde(x, latex=False):
    num = format_poly(x.num, latex)
    if x.den.is_constant() and x.den.constant_value() == 1:
        return num
    den = format_poly(x.den, latex)
    if latex:
        return rf"\frac{{{num}}}{{{den}}}"
    np = f"({num})" if (" " in num or "+" in num or "-" in num[1:]) else num
    dp = f"({den})" if (" " in den or "+" in den or "-" in den[1:]) else den
    return f"{np}/{dp}"
