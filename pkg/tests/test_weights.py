import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from paulilab.weights import (
    PlurisubharmonicityError,
    WeightParseError,
    WeightSpec,
    parse_weight,
)


def sympy_weight(w):
    """Rebuild a WeightSpec as a sympy expression (independent oracle)."""
    syms = sympy.symbols(" ".join(f"{v}{j+1}" for j in range(w.n) for v in ("x", "y")))
    if w.n == 0:
        return sympy.Integer(0), ()
    syms = (syms,) if not isinstance(syms, tuple) else syms
    expr = sympy.Integer(0)
    for c, e in w.terms:
        term = sympy.Float(c, 30)
        for s, k in zip(syms, e):
            term *= s**k
        expr += term
    return expr, syms


class TestParse:
    def test_z1_squared(self):
        w = parse_weight("|z1|^2")
        assert w.n == 1
        assert dict((e, c) for c, e in w.terms) == {(2, 0): 1.0, (0, 2): 1.0}
        assert w.is_decoupled and len(w.decoupled_parts) == 1

    def test_decoupled_quartic_expansion(self):
        w = parse_weight("|z1|^2 + |z2|^4")
        assert w.n == 2
        table = {e: c for c, e in w.terms}
        # (x2^2 + y2^2)^2 = x2^4 + 2 x2^2 y2^2 + y2^4
        assert table[(0, 0, 4, 0)] == 1.0
        assert table[(0, 0, 2, 2)] == 2.0
        assert table[(0, 0, 0, 4)] == 1.0
        assert w.is_decoupled
        part = w.decoupled_parts[1]
        assert {e: c for c, e in part.terms} == {(4, 0): 1.0, (2, 2): 2.0, (0, 4): 1.0}

    def test_cross_term_blocks_decoupling(self):
        w = parse_weight("x1^2*y2^2")
        assert w.n == 2
        assert not w.is_decoupled
        assert w.decoupled_parts is None

    def test_coefficients_and_signs(self):
        w = parse_weight("2*x1^2 - 0.5*y1^2 + 3")
        table = {e: c for c, e in w.terms}
        assert table == {(2, 0): 2.0, (0, 2): -0.5, (0, 0): 3.0}

    def test_parse_error_position(self):
        with pytest.raises(WeightParseError) as err:
            parse_weight("x1 + @")
        assert err.value.position == 5

    def test_odd_shorthand_exponent(self):
        with pytest.raises(WeightParseError, match="even"):
            parse_weight("|z1|^3")

    def test_shorthand_needs_power(self):
        with pytest.raises(WeightParseError):
            parse_weight("|z1|")

    def test_explicit_dimension(self):
        w = parse_weight("|z1|^2", n=2)
        assert w.n == 2
        with pytest.raises(WeightParseError):
            parse_weight("|z2|^2", n=1)

    def test_non_real_coefficient_rejected(self):
        with pytest.raises(ValueError, match="real"):
            WeightSpec(n=1, terms=((1 + 1j, (2, 0)),))

    def test_decoupled_parts_sum_reproduces_terms(self):
        w = parse_weight("|z1|^2 + 2*|z2|^4 + 5")
        total = {}
        for j, part in enumerate(w.decoupled_parts):
            for c, e in part.terms:
                full = [0] * (2 * w.n)
                full[2 * j], full[2 * j + 1] = e
                key = tuple(full)
                total[key] = total.get(key, 0.0) + c
        assert total == {e: c for c, e in w.terms}


class TestEvaluation:
    def test_abs_z_squared(self):
        w = parse_weight("|z1|^2")
        assert w.value([1.0, 1.0]) == 2.0

    def test_abs_z_fourth(self):
        w = parse_weight("|z1|^4")
        assert w.value([1.0, 1.0]) == 4.0

    def test_mixed(self):
        w = parse_weight("|z1|^2 + |z2|^4")
        assert w.value([0.0, 0.0, 2.0, 0.0]) == 16.0

    def test_dimension_mismatch(self):
        w = parse_weight("|z1|^2")
        with pytest.raises(ValueError, match="coordinates"):
            w.value([1.0, 2.0, 3.0])


class TestPotentials:
    def test_magnetic_potential_z2(self):
        # phi=|z|^2: A = (-y, x)
        w = parse_weight("|z1|^2")
        assert np.allclose(w.magnetic_potential([1.0, 1.0]), [-1.0, 1.0])

    def test_magnetic_potential_z4(self):
        # phi=|z|^4 at (1,0): phi_x = 4x|z|^2 = 4, phi_y = 0 -> A = (0, 2)
        w = parse_weight("|z1|^4")
        assert np.allclose(w.magnetic_potential([1.0, 0.0]), [0.0, 2.0])

    def test_magnetic_potential_origin(self):
        w = parse_weight("|z1|^4 + x1^2*y2^2")
        assert np.allclose(w.magnetic_potential([0.0] * 4), 0.0)

    def test_magnetic_potential_sympy_oracle(self):
        w = parse_weight("|z1|^4 + 2*x1^2*y2^2 + y2^4")
        expr, syms = sympy_weight(w)
        p = [0.3, -1.2, 0.7, 0.25]
        subs = dict(zip(syms, p))
        grad = [float(sympy.diff(expr, s).subs(subs)) for s in syms]
        expected = []
        for j in range(w.n):
            expected += [-0.5 * grad[2 * j + 1], 0.5 * grad[2 * j]]
        assert np.allclose(w.magnetic_potential(p), expected, rtol=1e-13)

    def test_electric_potential_constant(self):
        w = parse_weight("|z1|^2")
        for p in ([0.0, 0.0], [3.0, -4.0]):
            assert w.electric_potential(p) == pytest.approx(2.0, rel=1e-14)

    def test_electric_potential_quartic(self):
        w = parse_weight("|z1|^4")
        assert w.electric_potential([1.0, 0.0]) == pytest.approx(8.0, rel=1e-14)

    def test_electric_potential_additive(self):
        w = parse_weight("|z1|^2 + |z2|^2")
        assert w.electric_potential([0.3, 1.0, -2.0, 0.1]) == pytest.approx(4.0, rel=1e-14)


class TestLevi:
    def test_identity_weight(self):
        w = parse_weight("|z1|^2")
        m = w.levi_matrix([0.5, -0.5])
        assert m.entries.shape == (1, 1)
        assert m.entries[0, 0] == pytest.approx(1.0)

    def test_diag_quartic(self):
        w = parse_weight("|z1|^2 + |z2|^4")
        m = w.levi_matrix([0.0, 0.0, 1.0, 0.0])
        assert np.allclose(m.entries, np.diag([1.0, 4.0]))

    def test_degenerate_direction(self):
        w = parse_weight("|z1|^2 + |z2|^4")
        m = w.levi_matrix([5.0, 1.0, 0.0, 0.0])
        assert np.allclose(m.entries, np.diag([1.0, 0.0]))

    def test_spectrum_examples(self):
        w = parse_weight("|z1|^2 + |z2|^2")
        assert np.allclose(w.levi_spectrum([0.1, 0.2, 0.3, 0.4]), [1.0, 1.0])
        w2 = parse_weight("|z1|^2 + |z2|^4")
        assert np.allclose(w2.levi_spectrum([1.0, 2.0, 0.0, 0.0]), [0.0, 1.0])
        w3 = parse_weight("|z1|^4")
        assert np.allclose(w3.levi_spectrum([2.0, 0.0]), [16.0])

    def test_hermitian_exactly(self):
        w = parse_weight("x1^2*y2^2 + |z1|^4")
        m = w.levi_matrix([0.7, -0.3, 1.1, 0.4]).entries
        assert np.array_equal(m, m.conj().T)

    def test_levi_sympy_oracle(self):
        w = parse_weight("|z1|^4 + x1^2*y2^2 + 0.5*|z2|^2")
        expr, syms = sympy_weight(w)
        p = [0.4, -0.8, 1.3, 0.6]
        subs = dict(zip(syms, p))
        m = w.levi_matrix(p).entries
        for j in range(2):
            for k in range(2):
                wirt = sympy.Rational(1, 4) * (
                    sympy.diff(expr, syms[2 * j], syms[2 * k])
                    + sympy.diff(expr, syms[2 * j + 1], syms[2 * k + 1])
                    + sympy.I * (
                        sympy.diff(expr, syms[2 * j], syms[2 * k + 1])
                        - sympy.diff(expr, syms[2 * j + 1], syms[2 * k])
                    )
                )
                val = complex(wirt.subs(subs))
                assert m[j, k] == pytest.approx(val, rel=1e-12, abs=1e-12)

    def test_jacobi_matches_lapack_n3(self):
        w = parse_weight("|z1|^4 + |z2|^2 + |z3|^4 + x1^2*y2^2 + y2^2*x3^2")
        p = [0.5, -0.2, 0.9, 0.4, -0.6, 0.3]
        m = w.levi_matrix(p).entries
        mine = w.levi_spectrum(p)
        assert np.allclose(mine, np.linalg.eigvalsh(m), atol=1e-12)


coeff_st = st.floats(min_value=-3, max_value=3, allow_nan=False, allow_infinity=False)


def random_weight(draw, n):
    nterms = draw(st.integers(min_value=1, max_value=4))
    terms = {}
    for _ in range(nterms):
        e = tuple(draw(st.integers(min_value=0, max_value=3)) for _ in range(2 * n))
        terms[e] = draw(coeff_st)
    return WeightSpec(n=n, terms=tuple((c, e) for e, c in sorted(terms.items())))


@st.composite
def weights_st(draw):
    n = draw(st.integers(min_value=1, max_value=2))
    return random_weight(draw, n)


@st.composite
def weight_and_point(draw):
    w = draw(weights_st())
    p = [draw(st.floats(min_value=-2, max_value=2, allow_nan=False)) for _ in range(2 * w.n)]
    return w, p


class TestInvariants:
    @given(weight_and_point())
    @settings(max_examples=60, deadline=None)
    def test_trace_is_quarter_laplacian(self, wp):
        w, p = wp
        tr = w.levi_matrix(p).trace
        lap = w.laplacian(p)
        assert tr == pytest.approx(lap / 4.0, rel=1e-12, abs=1e-12)

    @given(weight_and_point())
    @settings(max_examples=60, deadline=None)
    def test_electric_is_twice_trace(self, wp):
        w, p = wp
        assert w.electric_potential(p) == pytest.approx(
            2.0 * w.levi_matrix(p).trace, rel=1e-12, abs=1e-12
        )

    @given(weight_and_point())
    @settings(max_examples=40, deadline=None)
    def test_levi_hermitian_exactly(self, wp):
        w, p = wp
        m = w.levi_matrix(p).entries
        assert np.array_equal(m, m.conj().T)

    def test_decoupled_levi_diagonal(self):
        w = parse_weight("|z1|^4 + 0.5*|z2|^2")
        for p in ([0.5, 1.0, -0.7, 0.2], [1.0, 0.0, 0.0, 2.0]):
            m = w.levi_matrix(p).entries
            assert np.allclose(m - np.diag(np.diag(m)), 0.0)

    def test_sum_of_moduli_gives_ones(self):
        w = parse_weight("|z1|^2 + |z2|^2")
        for p in ([0.0, 0.0, 0.0, 0.0], [2.0, -1.0, 0.5, 3.0]):
            assert np.allclose(w.levi_spectrum(p), 1.0)

    @given(weight_and_point())
    @settings(max_examples=25, deadline=None)
    def test_gradient_matches_central_differences(self, wp):
        w, p = wp
        p = np.asarray(p)
        a = w.magnetic_potential(p)
        for h in (1e-3,):
            fd = np.empty_like(a)
            for v in range(2 * w.n):
                ep = np.zeros_like(p)
                ep[v] = h
                fd_v = (w.value(p + ep) - w.value(p - ep)) / (2 * h)
                j, axis = divmod(v, 2)
                if axis == 0:
                    fd[2 * j + 1] = 0.5 * fd_v
                else:
                    fd[2 * j] = -0.5 * fd_v
            assert np.allclose(a, fd, atol=5e-5, rtol=5e-5)

    def test_fd_error_quarters_when_h_halves(self):
        w = parse_weight("|z1|^4 + x1^2*y1^2")
        p = np.array([0.8, -0.6])
        exact = w.gradient(p)[0]

        def fd(h):
            return (w.value(p + [h, 0]) - w.value(p - [h, 0])) / (2 * h)

        e1 = abs(fd(0.1) - exact)
        e2 = abs(fd(0.05) - exact)
        assert e1 / e2 == pytest.approx(4.0, rel=0.25)


class TestCertification:
    def test_psh_weight_passes(self):
        w = parse_weight("|z1|^2 + |z2|^4")
        pts = np.random.default_rng(0).uniform(-3, 3, size=(50, 4))
        w.certify_plurisubharmonic(pts)

    def test_concave_weight_fails(self):
        w = parse_weight("0 - |z1|^2")
        with pytest.raises(PlurisubharmonicityError, match="indefinite"):
            w.certify_plurisubharmonic([[1.0, 1.0]])

    def test_cross_term_weight_fails(self):
        # x1^2*y2^2 has an indefinite Levi matrix away from the axes
        w = parse_weight("x1^2*y2^2")
        with pytest.raises(PlurisubharmonicityError):
            w.certify_plurisubharmonic([[1.0, 0.0, 0.0, 1.0]])

    def test_levi_lowest_many_matches_spectrum(self):
        w = parse_weight("|z1|^4 + x1^2*y2^2 + |z2|^2")
        pts = np.random.default_rng(1).uniform(-2, 2, size=(20, 4))
        fast = w.levi_lowest_many(pts)
        slow = [w.levi_spectrum(p)[0] for p in pts]
        assert np.allclose(fast, slow, atol=1e-12)


class TestTransforms:
    def test_shift_changes_only_value(self):
        w = parse_weight("|z1|^2")
        ws = w.shifted(5.0)
        assert ws.value([1.0, 1.0]) == 7.0
        assert np.allclose(ws.magnetic_potential([1.0, 1.0]), w.magnetic_potential([1.0, 1.0]))

    def test_scaling(self):
        w = parse_weight("|z1|^2 + |z2|^4")
        w2 = w.scaled(2.0)
        p = [0.5, 0.5, 1.0, -1.0]
        assert np.allclose(w2.magnetic_potential(p), 2 * w.magnetic_potential(p))
        assert w2.electric_potential(p) == pytest.approx(2 * w.electric_potential(p), rel=1e-14)
        assert np.allclose(w2.levi_spectrum(p), 2 * np.asarray(w.levi_spectrum(p)))

    def test_describe_roundtrip(self):
        w = parse_weight("|z1|^2 + 2*x2^2")
        w2 = parse_weight(w.describe())
        assert w2.terms == w.terms
