"""Unit tests for symbols, profiles and symbol algebra."""

import cmath
import math

import numpy as np
import pytest

from lab.core.geometry import random_orthogonal
from lab.exceptions import InvalidArgumentError, UnsupportedOrderError
from lab.models.experiment import DirectionSpec, EpsilonDecay, OperatorSpec, SymbolSpec
from lab.models.hilbert import EpsilonSequence
from lab.symbols.algebra import (
    compose_orthogonal,
    finite_difference,
    gram_factor,
    iterated_laplacian,
    laplacian,
    multiply_coordinate,
    smooth_symbol,
    taylor_form,
)
from lab.symbols.base import CallableSymbol
from lab.symbols.registry import build_epsilon, build_operator, build_symbol, build_symbols
from lab.symbols.stock import (
    exp_i_symbol,
    linear_combination,
    poly_scalar_symbol,
    product_symbol,
    trig_smeps_norm,
    trig_symbol,
)

X = np.array([0.3, -1.2, 0.5, 2.0, 0.0, -0.7, 1.1, 0.4])


class TestStockSymbols:
    """Test cases for stock symbol families."""

    def test_trig_value_and_derivative(self, trig, geometric_direction):
        """Test values and first derivative of cos(<a,x> + theta)."""
        s = float(geometric_direction @ X) + 0.3
        u = np.eye(8)[0]
        assert trig(X) == pytest.approx(math.cos(s))
        assert trig.derivative(X, [u]) == pytest.approx(-math.sin(s) * geometric_direction[0])

    def test_trig_claims(self, trig):
        """Test a dominated direction has S_m norm equal to the amplitude."""
        assert trig.claim.has_smeps
        assert trig.claim.smeps_norm == pytest.approx(1.0)
        assert trig.claim.depth == 3
        assert trig.claim.qa_operator.rank == 1

    def test_trig_smeps_norm_grows_with_depth(self, eps):
        """Test the S_m norm of a direction exceeding the weights."""
        a = np.zeros(8)
        a[0] = 2.0
        assert trig_smeps_norm(a, eps, 3) == pytest.approx(8.0)
        assert trig_smeps_norm(a, EpsilonSequence.of(np.zeros(8)), 1) == math.inf

    def test_exp_i_is_complex(self, exp_i):
        """Test e^{i <a, x>}."""
        assert exp_i.is_complex
        assert exp_i(X) == pytest.approx(cmath.exp(0.4j * X[1]))

    def test_product_claim(self, trig_product, eps):
        """Test product claims multiply norms and add weights."""
        claim = trig_product.claim
        assert claim.smeps_norm == pytest.approx(1.0)
        assert np.allclose(claim.eps.values, 2.0 * eps.values)
        assert claim.depth == 3
        assert claim.qa_operator.trace == pytest.approx(2.0 * (trig_product.gram[0, 0] + trig_product.gram[1, 1]))

    def test_product_value(self, trig, exp_i, trig_product):
        """Test product evaluation."""
        assert trig_product(X) == pytest.approx(trig(X) * exp_i(X))

    def test_linear_combination_bound(self, trig, bell):
        """Test the sup bound of a combination."""
        combo = linear_combination([2.0, -0.5], [trig, bell])
        assert combo.claim.sup_bound == pytest.approx(2.5)
        assert combo(X) == pytest.approx(2.0 * trig(X) - 0.5 * bell(X))

    def test_bell_value(self, bell):
        """Test exp(-Q_C(x)/2)."""
        expected = math.exp(-0.5 * (0.8 * X[0] ** 2 + 0.4 * X[1] ** 2))
        assert bell(X) == pytest.approx(expected)
        assert bell.claim.norm_bound == 1.0

    def test_poly_exponent_validation(self, geometric_direction):
        """Test poly_scalar rejects non-positive exponents."""
        with pytest.raises(InvalidArgumentError):
            poly_scalar_symbol([geometric_direction], [0])

    def test_wrong_point_dimension(self, trig):
        """Test evaluation at a point of the wrong dimension."""
        with pytest.raises(InvalidArgumentError):
            trig(np.zeros(3))


class TestCallableSymbol:
    """Test cases for the finite-difference fallback."""

    def test_fd_derivatives(self, geometric_direction):
        """Test Richardson differences against the closed form."""
        a = geometric_direction
        f = CallableSymbol(lambda pts: np.cos(pts @ a + 0.3), 8, label="cos")
        s = float(a @ X) + 0.3
        u, v = np.eye(8)[0], np.eye(8)[1]
        assert not f.certified
        assert f.derivative(X, [u]) == pytest.approx(-math.sin(s) * a[0], abs=1e-9)
        assert f.derivative(X, [u, v]) == pytest.approx(-math.cos(s) * a[0] * a[1], abs=1e-6)

    def test_order_limit(self):
        """Test orders above two are unsupported."""
        f = CallableSymbol(lambda pts: pts[:, 0] ** 3, 2)
        u = np.array([1.0, 0.0])
        with pytest.raises(UnsupportedOrderError):
            f.derivative(np.zeros(2), [u, u, u])


class TestAlgebra:
    """Test cases for symbol algebra."""

    def test_laplacian_closed_form(self, trig, geometric_direction, frame):
        """Test Delta cos(<a,x>+theta) = -|a|^2 cos(<a,x>+theta) with and without a frame."""
        s = float(geometric_direction @ X) + 0.3
        expected = -float(geometric_direction @ geometric_direction) * math.cos(s)
        assert laplacian(trig, X) == pytest.approx(expected)
        assert laplacian(trig, X, frame) == pytest.approx(expected)

    def test_iterated_laplacian(self, trig, geometric_direction):
        """Test Delta^2 of a trig symbol."""
        s = float(geometric_direction @ X) + 0.3
        norm_sq = float(geometric_direction @ geometric_direction)
        assert iterated_laplacian(trig, X, 2) == pytest.approx(norm_sq ** 2 * math.cos(s))
        assert iterated_laplacian(trig, X, 0) == pytest.approx(trig(X))

    def test_taylor_form(self, trig, geometric_direction):
        """Test the second Taylor form."""
        a = geometric_direction
        y1, y2 = np.eye(8)[0], np.ones(8)
        s = float(a @ X) + 0.3
        expected = -math.cos(s) * float(a @ y1) * float(a @ y2)
        assert taylor_form(trig, X, 2, [y1, y2]) == pytest.approx(expected)
        with pytest.raises(InvalidArgumentError):
            taylor_form(trig, X, 2, [y1])

    def test_finite_difference_oracle(self, trig):
        """Test central differences agree with the chain rule."""
        u = np.eye(8)[0]
        assert finite_difference(trig, X, [u]) == pytest.approx(trig.derivative(X, [u]), abs=1e-8)
        with pytest.raises(UnsupportedOrderError):
            finite_difference(trig, X, [u, u, u])

    def test_compose_orthogonal(self, trig):
        """Test (f o phi)(x) = f(phi x) and the conjugated claim."""
        phi = random_orthogonal(8, seed=5)
        composed = compose_orthogonal(trig, phi)
        assert composed(X) == pytest.approx(trig(phi.apply(X)))
        assert composed.claim.qa_operator.trace == pytest.approx(trig.claim.qa_operator.trace)
        assert composed.claim.smeps_norm is None

    def test_multiply_coordinate(self, trig):
        """Test x -> <z, x> f(x)."""
        z = np.linspace(-1.0, 1.0, 8)
        assert multiply_coordinate(trig, z)(X) == pytest.approx(float(z @ X) * trig(X))

    def test_gram_factor(self):
        """Test L L^T = G for regular and singular Gram matrices."""
        regular = np.array([[4.0, 2.0], [2.0, 3.0]])
        factor = gram_factor(regular)
        assert np.allclose(factor @ factor.T, regular)
        singular = np.ones((2, 2))
        pruned = gram_factor(singular)
        assert pruned.shape == (2, 1)
        assert np.allclose(pruned @ pruned.T, singular)


class TestSmoothing:
    """Test cases for heat smoothing of symbols."""

    def test_trig_closed_form(self, trig, geometric_direction):
        """Test H_t cos = e^{-t|a|^2/2} cos."""
        t = 0.7
        smoothed, exact = smooth_symbol(trig, t)
        damping = math.exp(-0.5 * t * float(geometric_direction @ geometric_direction))
        assert exact
        assert smoothed(X) == pytest.approx(damping * trig(X))

    def test_time_zero_identity(self, trig):
        """Test H_0 f = f."""
        smoothed, exact = smooth_symbol(trig, 0.0)
        assert exact and smoothed is trig

    def test_negative_time(self, trig):
        """Test t < 0 is rejected."""
        with pytest.raises(InvalidArgumentError):
            smooth_symbol(trig, -0.1)

    def test_quadratic(self, quadratic, geometric_direction):
        """Test H_t <a,x>^2 = <a,x>^2 + t|a|^2."""
        t = 0.4
        smoothed, exact = smooth_symbol(quadratic, t)
        expected = float(geometric_direction @ X) ** 2 + t * float(geometric_direction @ geometric_direction)
        assert exact
        assert smoothed(X) == pytest.approx(expected)

    def test_bell(self, bell):
        """Test the smoothed bell against the per-coordinate closed form."""
        t = 0.5
        smoothed, exact = smooth_symbol(bell, t)
        expected = 1.0
        for lam, x in ((0.8, X[0]), (0.4, X[1])):
            expected *= (1 + t * lam) ** -0.5 * math.exp(-0.5 * lam * x ** 2 / (1 + t * lam))
        assert exact
        assert smoothed(X) == pytest.approx(expected, rel=1e-12)

    def test_orthogonal_product_closed_form(self, eps):
        """Test a product of factors on orthogonal directions smooths in closed form."""
        a, b = np.zeros(8), np.zeros(8)
        a[0], b[1] = 0.3, 0.4
        f = product_symbol(trig_symbol(a, 0.3, eps, 3), exp_i_symbol(b, eps, 3))
        t = 0.5
        smoothed, exact = smooth_symbol(f, t)
        expected = math.exp(-0.5 * t * (0.09 + 0.16)) * f(X)
        assert exact
        assert smoothed(X) == pytest.approx(expected)

    def test_coupled_product_uses_quadrature(self, trig_product, geometric_direction):
        """Test a product on overlapping directions falls back to quadrature."""
        a = geometric_direction
        b = np.zeros(8)
        b[1] = 0.4
        t = 0.5
        smoothed, exact = smooth_symbol(trig_product, t, order=40)
        s = float(a @ X) + 0.3
        plus = cmath.exp(1j * (s + b @ X)) * math.exp(-0.5 * t * float((a + b) @ (a + b)))
        minus = cmath.exp(1j * (-s + b @ X)) * math.exp(-0.5 * t * float((b - a) @ (b - a)))
        assert not exact
        assert smoothed(X) == pytest.approx(0.5 * (plus + minus), abs=1e-10)


class TestRegistry:
    """Test cases for building symbols from config specs."""

    def test_build_epsilon(self):
        """Test both weight sequences."""
        assert build_epsilon(4, EpsilonDecay.GEOMETRIC, 0.5).values.tolist() == [1.0, 0.5, 0.25, 0.125]
        assert build_epsilon(3, EpsilonDecay.INVERSE_SQUARE).values[2] == pytest.approx(1.0 / 9.0)

    def test_build_operator_rank(self):
        """Test a truncated geometric operator."""
        op = build_operator(OperatorSpec(kind="geometric", ratio=0.5, rank=2), 6)
        assert op.rank == 2
        assert op.trace == pytest.approx(1.5)

    def test_build_trig(self, eps):
        """Test a trig symbol on a basis direction."""
        spec = SymbolSpec(
            id="t", family="trig", depth=3, directions=[DirectionSpec(kind="basis", index=2, scale=0.1)]
        )
        symbol = build_symbol(spec, 8, eps)
        assert symbol.label == "t"
        assert symbol(X) == pytest.approx(math.cos(0.1 * X[2]))
        assert symbol.claim.smeps_norm == pytest.approx(1.0)

    def test_build_product_and_combination(self, eps):
        """Test nested specs."""
        leaf = {"family": "trig", "directions": [{"kind": "basis", "index": 0, "scale": 0.2}]}
        specs = [
            SymbolSpec(id="p", family="product", factors=[{"id": "a", **leaf}, {"id": "b", **leaf}]),
            SymbolSpec(id="c", family="combination", factors=[{"id": "a", **leaf}], coefficients=[3.0]),
        ]
        symbols = build_symbols(specs, 8, eps)
        assert list(symbols) == ["p", "c"]
        assert symbols["p"](X) == pytest.approx(math.cos(0.2 * X[0]) ** 2)
        assert symbols["c"](X) == pytest.approx(3.0 * math.cos(0.2 * X[0]))

    def test_bell_from_spec(self):
        """Test a rank-one bell."""
        spec = SymbolSpec(
            id="b",
            family="gaussian_bell",
            operator=OperatorSpec(kind="rank_one", direction=DirectionSpec(kind="basis", index=0)),
        )
        symbol = build_symbol(spec, 4)
        assert symbol(np.array([2.0, 0.0, 0.0, 0.0])) == pytest.approx(math.exp(-2.0))
        assert symbol.claim.qa_operator is None
