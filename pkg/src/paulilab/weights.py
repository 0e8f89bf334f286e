"""Exact polynomial calculus for real weights on C^n identified with R^{2n}.

A weight is a real polynomial phi(x_1, y_1, ..., x_n, y_n).  Everything the
operator assembly needs (gradient, magnetic and electric potential, Levi
matrix and its eigenvalues) is obtained by exact differentiation of the
coefficient table, never by numerical differencing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "WeightSpec",
    "LeviMatrix",
    "WeightParseError",
    "PlurisubharmonicityError",
    "parse_weight",
]


class WeightParseError(ValueError):
    """Raised on malformed weight expressions; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class PlurisubharmonicityError(ValueError):
    """Raised when the Levi matrix is found indefinite at a sample point."""


# ---------------------------------------------------------------------------
# polynomial core: {exponent tuple -> coefficient}
# ---------------------------------------------------------------------------

def _poly_add(a, b):
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0.0) + c
    return out


def _poly_mul(a, b):
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(i + j for i, j in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _poly_pow(a, k, nvars):
    out = {(0,) * nvars: 1.0}
    for _ in range(k):
        out = _poly_mul(out, a)
    return out


def _poly_diff(a, var):
    out = {}
    for e, c in a.items():
        if e[var] == 0:
            continue
        e2 = list(e)
        e2[var] -= 1
        out[tuple(e2)] = c * e[var]
    return out


def _poly_clean(a, tol=0.0):
    return {e: c for e, c in a.items() if c != 0.0 and abs(c) > tol}


def _poly_eval_many(a, pts):
    """Evaluate on an (m, nvars) array of points; returns shape (m,)."""
    pts = np.asarray(pts, dtype=float)
    vals = np.zeros(pts.shape[0])
    for e, c in a.items():
        term = np.full(pts.shape[0], c)
        for var, k in enumerate(e):
            if k:
                term = term * pts[:, var] ** k
        vals += term
    return vals


# ---------------------------------------------------------------------------
# weight expression parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<var>[xy]\d+)"
    r"|(?P<zmod>\|z\d+\|)"
    r"|(?P<op>[-+*^]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.start() != pos:
            raise WeightParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(0).strip(), pos))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive descent over: expr = [+-] term (('+'|'-') term)*,
    term = factor ('*' factor)*, factor = atom ['^' int],
    atom = number | x<j> | y<j> | '|z<j>|' (shorthand requires an even power).
    """

    def __init__(self, text, n):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.max_index = 0
        self.n_fixed = n

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def var_slot(self, name, pos):
        axis = 0 if name[0] == "x" else 1
        j = int(name[1:])
        if j < 1:
            raise WeightParseError(f"variable index must be >= 1 in {name!r}", pos)
        self.max_index = max(self.max_index, j)
        return 2 * (j - 1) + axis

    def parse(self):
        terms = []
        sign = 1.0
        kind, val, pos = self.peek()
        if kind == "op" and val in "+-":
            self.next()
            sign = -1.0 if val == "-" else 1.0
        terms.append((sign, self.parse_term()))
        while True:
            kind, val, pos = self.peek()
            if kind is None:
                break
            if kind != "op" or val not in "+-":
                raise WeightParseError(f"expected '+' or '-', got {val!r}", pos)
            self.next()
            terms.append((-1.0 if val == "-" else 1.0, self.parse_term()))

        n = self.n_fixed if self.n_fixed is not None else max(self.max_index, 1)
        if self.max_index > n:
            raise WeightParseError(
                f"variable index {self.max_index} exceeds declared dimension n={n}", 0
            )
        nvars = 2 * n
        poly = {}
        for sgn, raw in terms:
            widened = {}
            for e, c in raw.items():
                e = tuple(e) + (0,) * (nvars - len(e))
                widened[e] = widened.get(e, 0.0) + sgn * c
            poly = _poly_add(poly, widened)
        return _poly_clean(poly), n

    def parse_term(self):
        poly = self.parse_factor()
        while True:
            kind, val, pos = self.peek()
            if kind == "op" and val == "*":
                self.next()
                other = self.parse_factor()
                a, b = self._widen(poly, other)
                poly = _poly_mul(a, b)
            else:
                return poly

    def _widen(self, a, b):
        width = max(len(next(iter(a))), len(next(iter(b))))
        wa = {tuple(e) + (0,) * (width - len(e)): c for e, c in a.items()}
        wb = {tuple(e) + (0,) * (width - len(e)): c for e, c in b.items()}
        return wa, wb

    def parse_factor(self):
        kind, val, pos = self.next()
        if kind == "num":
            base = {(0, 0): float(val)}
            zmod = False
        elif kind == "var":
            slot = self.var_slot(val, pos)
            e = [0] * (slot + 1)
            e[slot] = 1
            base = {tuple(e): 1.0}
            zmod = False
        elif kind == "zmod":
            slot = self.var_slot("x" + val[2:-1], pos)  # x-slot of coordinate j
            ex = [0] * (slot + 2)
            ey = list(ex)
            ex[slot] = 2
            ey[slot + 1] = 2
            base = {tuple(ex): 1.0, tuple(ey): 1.0}  # x_j^2 + y_j^2
            zmod = True
        else:
            raise WeightParseError(f"expected a factor, got {val!r}" if val else "unexpected end of expression", pos)

        kind, val, pos2 = self.peek()
        if kind == "op" and val == "^":
            self.next()
            kind, val, pos3 = self.next()
            if kind != "num" or not val.isdigit():
                raise WeightParseError("exponent must be a non-negative integer", pos3)
            k = int(val)
            if zmod:
                if k % 2 != 0:
                    raise WeightParseError("shorthand |z_j|^k requires an even exponent", pos3)
                k //= 2
            nvars = len(next(iter(base)))
            return _poly_pow(base, k, nvars)
        if zmod:
            raise WeightParseError("shorthand |z_j| must carry an explicit even power", pos2)
        return base


def parse_weight(text, n=None):
    """Parse a polynomial weight expression into a :class:`WeightSpec`.

    The grammar accepts terms joined by ``+``/``-`` whose factors are
    ``x<j>``, ``y<j>``, numeric literals, powers ``^k`` and the shorthand
    ``|z<j>|^2k`` (expanded to ``(x_j^2 + y_j^2)^k``).  The complex dimension
    is inferred from the largest coordinate index unless ``n`` is given.
    """
    poly, n = _Parser(text, n).parse()
    terms = tuple(sorted((tuple(e), float(c)) for e, c in poly.items()))
    return WeightSpec(n=n, terms=tuple((c, e) for e, c in terms))


# ---------------------------------------------------------------------------
# Levi matrix container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeviMatrix:
    """Complex Hessian (d^2 phi / dz_j dzbar_k) at a point; Hermitian by construction."""

    entries: np.ndarray

    @property
    def trace(self):
        return float(np.real(np.trace(self.entries)))

    def eigenvalues(self):
        return _hermitian_eigenvalues(self.entries)


def _hermitian_eigenvalues(mat):
    """Ascending eigenvalues of a tiny Hermitian matrix.

    Closed forms for 1x1/2x2, a cyclic Jacobi sweep otherwise.  Imaginary
    residue below 1e-12 is discarded.
    """
    m = np.asarray(mat, dtype=complex)
    k = m.shape[0]
    if k == 1:
        return np.array([m[0, 0].real])
    if k == 2:
        a = m[0, 0].real
        c = m[1, 1].real
        half = 0.5 * (a - c)
        disc = np.hypot(half, abs(m[0, 1]))
        mean = 0.5 * (a + c)
        return np.array([mean - disc, mean + disc])
    return _jacobi_eigenvalues(m)


def _jacobi_eigenvalues(mat, tol=1e-14, max_sweeps=60):
    a = np.array(mat, dtype=complex)
    k = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a))))
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                off = max(off, abs(apq))
                if abs(apq) <= tol * scale:
                    continue
                phase = apq / abs(apq)
                tau = (a[q, q].real - a[p, p].real) / (2.0 * abs(apq))
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.eye(k, dtype=complex)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s * phase
                rot[q, p] = -s * np.conj(phase)
                a = rot.conj().T @ a @ rot
        if off <= tol * scale:
            break
    diag = np.diagonal(a)
    if np.max(np.abs(diag.imag)) > 1e-12 * scale:
        raise ArithmeticError("Jacobi iteration left a non-real diagonal")
    return np.sort(diag.real)


# ---------------------------------------------------------------------------
# WeightSpec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSpec:
    """A real polynomial weight on C^n with exact derivative tables.

    ``terms`` is a canonical tuple of ``(coefficient, exponents)`` pairs where
    ``exponents`` indexes ``(x_1, y_1, ..., x_n, y_n)``.
    """

    n: int
    terms: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")
        for c, e in self.terms:
            if isinstance(c, complex) and c.imag != 0:
                raise ValueError(f"weight coefficients must be real, got {c}")
            if len(e) != 2 * self.n:
                raise ValueError("exponent tuples must have length 2n")
            if any(k < 0 for k in e):
                raise ValueError("exponents must be non-negative")

    # -- structure ---------------------------------------------------------

    @cached_property
    def _poly(self):
        return {tuple(e): float(c) for c, e in self.terms}

    @cached_property
    def decoupled_parts(self):
        """Per-coordinate single-variable weights when phi = sum_j phi_j(z_j), else None.

        Constant terms are assigned to the first part.
        """
        buckets = [{} for _ in range(self.n)]
        for e, c in self._poly.items():
            support = {j for j in range(self.n) if e[2 * j] or e[2 * j + 1]}
            if len(support) > 1:
                return None
            j = support.pop() if support else 0
            buckets[j][(e[2 * j], e[2 * j + 1])] = c
        parts = []
        for bucket in buckets:
            terms = tuple(sorted((e, c) for e, c in bucket.items()))
            parts.append(WeightSpec(n=1, terms=tuple((c, e) for e, c in terms)))
        return tuple(parts)

    @property
    def is_decoupled(self):
        return self.decoupled_parts is not None

    def describe(self):
        """Canonical human-readable rendering, usable as a weight id."""
        if not self.terms:
            return "0"
        names = [f"{v}{j + 1}" for j in range(self.n) for v in ("x", "y")]
        chunks = []
        for c, e in self.terms:
            factors = [f"{names[i]}^{k}" if k > 1 else names[i] for i, k in enumerate(e) if k]
            body = "*".join(factors)
            coeff = f"{c:g}"
            chunks.append(coeff if not body else (body if c == 1.0 else f"{coeff}*{body}"))
        return " + ".join(chunks).replace("+ -", "- ")

    # -- derivative tables -------------------------------------------------

    @cached_property
    def _grad(self):
        return tuple(_poly_clean(_poly_diff(self._poly, v)) for v in range(2 * self.n))

    @cached_property
    def _hess(self):
        g = self._grad
        return tuple(
            tuple(_poly_clean(_poly_diff(g[v], w)) for w in range(2 * self.n))
            for v in range(2 * self.n)
        )

    # -- evaluation ---------------------------------------------------------

    def _check_point(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if p.shape[1] != 2 * self.n:
            raise ValueError(f"point has {p.shape[1]} coordinates, expected {2 * self.n}")
        return p

    def value(self, p):
        """phi(p) for a single point p in R^{2n}."""
        return float(_poly_eval_many(self._poly, self._check_point(p))[0])

    def value_many(self, pts):
        return _poly_eval_many(self._poly, self._check_point(pts))

    def gradient(self, p):
        p = self._check_point(p)
        return np.array([_poly_eval_many(g, p)[0] for g in self._grad])

    def gradient_axis_many(self, pts, axis):
        """d phi / d coordinate ``axis`` on an array of points."""
        return _poly_eval_many(self._grad[axis], self._check_point(pts))

    def magnetic_potential(self, p):
        """A(p) = (1/2) * (-phi_y1, phi_x1, ..., -phi_yn, phi_xn)."""
        g = self.gradient(p)
        out = np.empty(2 * self.n)
        out[0::2] = -0.5 * g[1::2]
        out[1::2] = 0.5 * g[0::2]
        return out

    def magnetic_potential_many(self, pts):
        pts = self._check_point(pts)
        out = np.empty((pts.shape[0], 2 * self.n))
        for j in range(self.n):
            out[:, 2 * j] = -0.5 * _poly_eval_many(self._grad[2 * j + 1], pts)
            out[:, 2 * j + 1] = 0.5 * _poly_eval_many(self._grad[2 * j], pts)
        return out

    def laplacian(self, p):
        p = self._check_point(p)
        return float(sum(_poly_eval_many(self._hess[v][v], p)[0] for v in range(2 * self.n)))

    def electric_potential(self, p):
        """V(p) = (1/2) Laplacian(phi)(p) = 2 tr M_phi(p)."""
        return 0.5 * self.laplacian(p)

    def electric_potential_many(self, pts):
        pts = self._check_point(pts)
        acc = np.zeros(pts.shape[0])
        for v in range(2 * self.n):
            acc += _poly_eval_many(self._hess[v][v], pts)
        return 0.5 * acc

    def levi_trace_many(self, pts):
        """tr M_phi = Laplacian(phi)/4, vectorized."""
        return 0.5 * self.electric_potential_many(pts)

    def levi_matrix(self, p):
        """Levi matrix via Wirtinger calculus from real second partials."""
        p = self._check_point(p)
        n = self.n
        m = np.zeros((n, n), dtype=complex)
        h = self._hess
        for j in range(n):
            xj, yj = 2 * j, 2 * j + 1
            for k in range(j, n):
                xk, yk = 2 * k, 2 * k + 1
                re = _poly_eval_many(h[xj][xk], p)[0] + _poly_eval_many(h[yj][yk], p)[0]
                if j == k:
                    m[j, j] = 0.25 * re
                else:
                    im = _poly_eval_many(h[xj][yk], p)[0] - _poly_eval_many(h[yj][xk], p)[0]
                    m[j, k] = 0.25 * (re + 1j * im)
                    m[k, j] = np.conj(m[j, k])
        return LeviMatrix(entries=m)

    def levi_spectrum(self, p):
        """Ascending eigenvalues of the Levi matrix at p."""
        return self.levi_matrix(p).eigenvalues()

    def levi_lowest_many(self, pts):
        """Smallest Levi eigenvalue, vectorized for n <= 2 (closed forms)."""
        pts = self._check_point(pts)
        h = self._hess
        if self.n == 1:
            return 0.25 * (_poly_eval_many(h[0][0], pts) + _poly_eval_many(h[1][1], pts))
        if self.n == 2:
            a = 0.25 * (_poly_eval_many(h[0][0], pts) + _poly_eval_many(h[1][1], pts))
            c = 0.25 * (_poly_eval_many(h[2][2], pts) + _poly_eval_many(h[3][3], pts))
            re = _poly_eval_many(h[0][2], pts) + _poly_eval_many(h[1][3], pts)
            im = _poly_eval_many(h[0][3], pts) - _poly_eval_many(h[1][2], pts)
            disc = np.hypot(0.5 * (a - c), 0.25 * np.hypot(re, im))
            return 0.5 * (a + c) - disc
        return np.array([self.levi_spectrum(q)[0] for q in pts])

    # -- certification ------------------------------------------------------

    def certify_plurisubharmonic(self, pts, tol_factor=1e-10):
        """Check Levi positive semidefiniteness on a sample set; raise on violation.

        The tolerance is relative to the per-point matrix scale.  This is a
        sampled certificate, not a proof: weights are reported as certified
        on the sample set only.
        """
        pts = self._check_point(pts)
        if self.n <= 2:
            lows = self.levi_lowest_many(pts)
            traces = np.abs(self.levi_trace_many(pts))
            scale = np.maximum(1.0, np.maximum(traces, np.abs(lows)))
            bad = lows < -tol_factor * scale
            if np.any(bad):
                i = int(np.argmax(bad))
                raise PlurisubharmonicityError(
                    f"Levi matrix indefinite at {pts[i].tolist()}: "
                    f"lowest eigenvalue {lows[i]:.3e}"
                )
            return
        for q in pts:
            spec = self.levi_spectrum(q)
            scale = max(1.0, float(np.max(np.abs(spec))))
            if spec[0] < -tol_factor * scale:
                raise PlurisubharmonicityError(
                    f"Levi matrix indefinite at {q.tolist()}: lowest eigenvalue {spec[0]:.3e}"
                )

    def shifted(self, constant):
        """phi + constant (changes nothing derived from derivatives)."""
        zero = (0,) * (2 * self.n)
        poly = _poly_add(self._poly, {zero: float(constant)})
        terms = tuple(sorted((e, c) for e, c in _poly_clean(poly).items()))
        return WeightSpec(n=self.n, terms=tuple((c, e) for e, c in terms))

    def scaled(self, t):
        """t * phi for real t."""
        terms = tuple((t * c, e) for c, e in self.terms)
        return WeightSpec(n=self.n, terms=terms)
