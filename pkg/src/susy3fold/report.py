"""Plain-data outcomes for verification checks."""

from __future__ import annotations


class CheckResult:
    """A named pass/fail outcome.

    ``residual`` carries a rendered expression (or a short reason) when
    the check fails; ``details`` holds optional informational lines that
    reporting layers may print verbatim.
    """

    __slots__ = ("name", "passed", "residual", "details")

    def __init__(self, name, passed, residual=None, details=()):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "passed", bool(passed))
        object.__setattr__(self, "residual", residual)
        object.__setattr__(self, "details", tuple(details))

    def __setattr__(self, *_):
        raise AttributeError("CheckResult is immutable")

    def __bool__(self):
        return self.passed

    def __repr__(self):
        status = "pass" if self.passed else "fail"
        if self.residual is None:
            return f"CheckResult({self.name!r}, {status})"
        return f"CheckResult({self.name!r}, {status}, residual={self.residual!r})"
