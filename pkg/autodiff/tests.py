import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DimensionMismatch, NonFiniteValue
from lie.models import coordinate_output
from synthesis.backstepping import cbf_relative_degree2
from synthesis.constraints import band
from synthesis.models import ClassKInfinity
from systems.zoo import load_model

from . import elementary as el
from .derivatives import directional_derivative, gradient, hessian_vector, jacobian, linearize, pushforward
from .dual import DualScalar, next_tag, primal
from .linalg import solve
from .models import SmoothFn


def central_difference(fn, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((np.asarray(fn(x + e), dtype=float) - np.asarray(fn(x - e), dtype=float)) / (2 * step))
    return np.stack(cols, axis=-1)


# Building blocks for randomized checks: each maps a 3-vector to a scalar.
TERMS = [
    lambda x: x[0] * x[1] + x[2] ** 2,
    lambda x: el.sin(x[0]) * el.cos(x[1]),
    lambda x: el.exp(0.3 * x[2]) - x[0] / (2.0 + x[1] * x[1]),
    lambda x: el.arctan(x[0] - x[2]) * x[1],
    lambda x: el.sqrt(1.0 + x[0] ** 2) + el.tanh(x[1]),
    lambda x: el.log(3.0 + el.sin(x[2])) * x[0] ** 3,
]


class DualScalarTests(SimpleTestCase):
    def test_product_rule(self):
        tag = next_tag()
        a = DualScalar(tag, 2.0, (1.0,))
        b = DualScalar(tag, 3.0, (0.0,))
        out = a * b + a
        self.assertEqual(out.value, 8.0)
        self.assertEqual(out.partials, (4.0,))

    def test_comparisons_use_primal(self):
        tag = next_tag()
        self.assertTrue(DualScalar(tag, 1.0, (5.0,)) < 2.0)
        self.assertTrue(DualScalar(tag, 0.0, (1.0,)) == 0.0)
        self.assertFalse(DualScalar(tag, 0.0, (1.0,)))

    def test_perturbations_are_not_confused(self):
        # d/dx [ x * d/dy (x + y) ] at x = 1 is 1, not 2.
        def inner(x):
            return directional_derivative(SmoothFn(1, (), lambda y: x + y[0]), np.array([1.0]), np.array([1.0]))

        outer = SmoothFn(1, (), lambda x: x[0] * inner(x[0]))
        self.assertEqual(gradient(outer, np.array([1.0]))[0], 1.0)

    def test_plain_reals_are_bit_exact(self):
        fn = SmoothFn(3, (), lambda x: sum(term(x) for term in TERMS))
        x = np.array([0.3, -1.2, 0.7])
        expected = sum(term(x) for term in TERMS)
        value, _ = linearize(fn, x, np.zeros(3))
        self.assertEqual(fn(x), expected)
        self.assertEqual(primal(value), expected)

    def test_elementary_functions_match_analytic(self):
        x = 0.4
        cases = [
            (el.sin, math.cos(x)),
            (el.cos, -math.sin(x)),
            (el.tan, 1 + math.tan(x) ** 2),
            (el.exp, math.exp(x)),
            (el.log, 1 / x),
            (el.sqrt, 0.5 / math.sqrt(x)),
            (el.arctan, 1 / (1 + x * x)),
            (el.tanh, 1 - math.tanh(x) ** 2),
        ]
        for func, slope in cases:
            with self.subTest(func=func.__name__):
                out = func(DualScalar(next_tag(), x, (1.0,)))
                self.assertAlmostEqual(out.partials[0], slope, delta=4 * np.spacing(abs(slope)) + 1e-15)

    def test_numpy_object_arrays(self):
        tag = next_tag()
        arr = np.array([DualScalar(tag, 1.0, (1.0,)), 2.0])
        out = np.array([[2.0, 0.0], [0.0, 3.0]]) @ arr
        self.assertEqual(out[0].partials, (2.0,))
        self.assertEqual(out[1], 6.0)


class JacobianTests(SimpleTestCase):
    def test_identity(self):
        fn = SmoothFn(2, (2,), lambda x: x)
        np.testing.assert_array_equal(jacobian(fn, [3.0, -1.0]), np.eye(2))

    def test_polynomial(self):
        fn = SmoothFn(2, (2,), lambda x: np.array([x[0] ** 2, x[0] * x[1]]))
        np.testing.assert_allclose(jacobian(fn, [2.0, 3.0]), [[4.0, 0.0], [3.0, 2.0]])

    def test_inertia_entry_against_finite_difference(self):
        fn = SmoothFn(1, (), lambda q: 0.25 * 0.5 * el.cos(q[0]))
        theta = np.array([math.pi / 3])
        ad = gradient(fn, theta)[0]
        self.assertAlmostEqual(ad, -0.125 * math.sin(math.pi / 3), places=12)
        self.assertAlmostEqual(ad, central_difference(fn, theta)[0], delta=1e-8)

    def test_chunk_sizes_agree(self):
        fn = SmoothFn(3, (2,), lambda x: np.array([TERMS[1](x), TERMS[5](x)]))
        x = np.array([0.2, 0.5, -0.4])
        single = jacobian(fn, x, chunk_size=1)
        for size in (2, 3):
            np.testing.assert_allclose(jacobian(fn, x, chunk_size=size), single, rtol=0, atol=1e-15)

    def test_matrix_codomain(self):
        fn = SmoothFn(2, (2, 2), lambda x: np.array([[x[0], x[1] ** 2], [0.0, x[0] * x[1]]]))
        jac = jacobian(fn, [1.0, 2.0])
        self.assertEqual(jac.shape, (2, 2, 2))
        np.testing.assert_allclose(jac[0, 1], [0.0, 4.0])
        np.testing.assert_allclose(jac[1, 1], [2.0, 1.0])

    def test_randomized_first_derivatives(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            weights = rng.normal(size=len(TERMS))
            fn = SmoothFn(3, (), lambda x, w=weights: sum(wi * t(x) for wi, t in zip(w, TERMS)))
            x = rng.uniform(-1.0, 1.0, size=3)
            ad = gradient(fn, x)
            fd = central_difference(fn, x)
            scale = max(1.0, np.max(np.abs(ad)))
            with self.subTest(trial=trial):
                self.assertLessEqual(np.max(np.abs(ad - fd)) / scale, 1e-6)

    def test_non_finite_output_raises(self):
        fn = SmoothFn(1, (), lambda x: el.log(x[0]))
        with self.assertRaises(NonFiniteValue):
            gradient(fn, [-1.0])

    def test_wrong_input_length_raises(self):
        fn = SmoothFn(2, (2,), lambda x: x)
        with self.assertRaises(DimensionMismatch):
            jacobian(fn, [1.0, 2.0, 3.0])

    def test_wrong_output_shape_raises(self):
        fn = SmoothFn(2, (3,), lambda x: x)
        with self.assertRaises(DimensionMismatch):
            fn(np.zeros(2))


class DirectionalDerivativeTests(SimpleTestCase):
    def test_identity(self):
        fn = SmoothFn(3, (3,), lambda x: x)
        np.testing.assert_array_equal(directional_derivative(fn, [1.0, 2.0, 3.0], [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_bilinear(self):
        fn = SmoothFn(2, (), lambda x: x[0] * x[1])
        self.assertEqual(directional_derivative(fn, [2.0, 3.0], [1.0, 1.0]), 5.0)

    def test_matches_jacobian_product(self):
        fn = SmoothFn(3, (2,), lambda x: np.array([TERMS[2](x), TERMS[3](x)]))
        rng = np.random.default_rng(3)
        x, v = rng.normal(size=3), rng.normal(size=3)
        np.testing.assert_allclose(directional_derivative(fn, x, v), jacobian(fn, x) @ v, rtol=0, atol=1e-12)

    def test_direction_length_mismatch(self):
        fn = SmoothFn(2, (), lambda x: x[0])
        with self.assertRaises(DimensionMismatch):
            directional_derivative(fn, [1.0, 2.0], [1.0])


class PushforwardTests(SimpleTestCase):
    def test_matches_jacobian_times_directions(self):
        fn = SmoothFn(3, (2,), lambda x: np.array([TERMS[1](x), TERMS[4](x)]))
        rng = np.random.default_rng(4)
        x, V = rng.normal(size=3), rng.normal(size=(3, 4))
        value, rates = pushforward(fn, x, V)
        np.testing.assert_allclose(value, fn(x), rtol=1e-15, atol=0)
        self.assertEqual(rates.shape, (2, 4))
        np.testing.assert_allclose(rates, jacobian(fn, x) @ V, rtol=0, atol=1e-12)

    def test_scalar_function(self):
        fn = SmoothFn(2, (), lambda x: x[0] * x[1])
        value, rates = pushforward(fn, [2.0, 3.0], np.eye(2))
        self.assertEqual(value, 6.0)
        np.testing.assert_array_equal(rates, [3.0, 2.0])

    def test_nests_inside_a_directional_derivative(self):
        fn = SmoothFn(2, (), lambda x: x[0] ** 2 * x[1])
        rate = SmoothFn(2, (), lambda z: pushforward(fn, z, np.array([[1.0], [0.0]]))[1][0])
        self.assertAlmostEqual(directional_derivative(rate, [1.0, 2.0], [1.0, 0.0]), 4.0)

    def test_direction_rows_must_match(self):
        fn = SmoothFn(2, (), lambda x: x[0])
        with self.assertRaises(DimensionMismatch):
            pushforward(fn, [1.0, 2.0], np.ones((3, 2)))


class ComposeTests(SimpleTestCase):
    def test_outer_after_inner(self):
        inner = SmoothFn(2, (2,), lambda x: np.array([x[0] + x[1], x[0] * x[1]]), name='inner')
        outer = SmoothFn(2, (), lambda y: y[0] - y[1], name='outer')
        both = outer.compose(inner)
        self.assertEqual(both.name, 'outer∘inner')
        self.assertEqual(both([2.0, 3.0]), -1.0)
        np.testing.assert_array_equal(gradient(both, [2.0, 3.0]), [-2.0, -1.0])

    def test_shapes_must_chain(self):
        inner = SmoothFn(2, (3,), lambda x: np.array([x[0], x[1], 0.0]))
        outer = SmoothFn(2, (), lambda y: y[0])
        with self.assertRaises(DimensionMismatch):
            outer.compose(inner)


class HessianVectorTests(SimpleTestCase):
    def test_half_squared_norm(self):
        fn = SmoothFn(3, (), lambda x: 0.5 * (x[0] ** 2 + x[1] ** 2 + x[2] ** 2))
        v = np.array([0.3, -2.0, 1.5])
        np.testing.assert_allclose(hessian_vector(fn, [1.0, 2.0, 3.0], v), v)

    def test_cubic(self):
        fn = SmoothFn(2, (), lambda x: x[0] ** 2 * x[1])
        np.testing.assert_allclose(hessian_vector(fn, [1.0, 2.0], [1.0, 0.0]), [4.0, 2.0])

    def test_nested_against_finite_difference_of_gradient(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            weights = rng.normal(size=len(TERMS))
            fn = SmoothFn(3, (), lambda x, w=weights: sum(wi * t(x) for wi, t in zip(w, TERMS)))
            x, v = rng.uniform(-1.0, 1.0, size=3), rng.normal(size=3)
            ad = hessian_vector(fn, x, v)
            fd = central_difference(lambda z: gradient(fn, z), x) @ v
            scale = max(1.0, np.max(np.abs(ad)))
            with self.subTest(trial=trial):
                self.assertLessEqual(np.max(np.abs(ad - fd)) / scale, 1e-6)

    def check_against_second_differences(self, fn, x, v, step=1e-4):
        def mixed(i):
            e = np.zeros_like(x)
            e[i] = step
            return (fn(x + step * v + e) - fn(x + step * v - e) - fn(x - step * v + e) + fn(x - step * v - e)) / (
                4 * step * step)

        ad = hessian_vector(fn, x, v)
        fd = np.array([mixed(i) for i in range(x.shape[0])])
        self.assertLessEqual(np.max(np.abs(ad - fd)) / max(1.0, np.max(np.abs(ad))), 1e-5)

    def test_cartpole_angle_constraint_through_the_output(self):
        y = coordinate_output([1], 2, 2, 'configuration')
        fn = band(math.pi, math.pi / 4).psi.compose(y.state_fn(4))
        rng = np.random.default_rng(12)
        for trial in range(20):
            x = rng.uniform([-3.0, math.pi - 1.0, -2.0, -2.0], [3.0, math.pi + 1.0, 2.0, 2.0])
            v = rng.normal(size=4)
            with self.subTest(trial=trial):
                np.testing.assert_allclose(hessian_vector(fn, x, v), [0.0, -2.0 * v[1], 0.0, 0.0], atol=1e-12)
                self.check_against_second_differences(fn, x, v)

    def test_cartpole_angle_barrier(self):
        _, cartpole, _ = load_model('cartpole')
        cbf = cbf_relative_degree2(cartpole, coordinate_output([1], 2, 2, 'configuration'),
                                   band(math.pi, math.pi / 4), ClassKInfinity('linear', 1.0), verify=False)
        rng = np.random.default_rng(13)
        for trial in range(10):
            x = rng.uniform([-3.0, math.pi - 0.8, -2.0, -2.0], [3.0, math.pi + 0.8, 2.0, 2.0])
            with self.subTest(trial=trial):
                self.check_against_second_differences(cbf.barrier, x, rng.normal(size=4))


class SolveTests(SimpleTestCase):
    def test_matches_numpy(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        b = rng.normal(size=4)
        np.testing.assert_allclose(solve(A, b), np.linalg.solve(A, b), rtol=1e-12)

    def test_matrix_right_hand_side(self):
        A = np.array([[0.0, 2.0], [1.0, 1.0]])
        np.testing.assert_allclose(solve(A, np.eye(2)), np.linalg.inv(A))

    def test_differentiates_through_inverse(self):
        fn = SmoothFn(1, (), lambda t: solve(np.array([[2.0 + t[0], 0.0], [1.0, 1.0]]), np.array([1.0, 0.0]))[0])
        self.assertAlmostEqual(gradient(fn, [0.0])[0], -0.25)

    def test_singular_raises(self):
        with self.assertRaises(np.linalg.LinAlgError):
            solve(np.zeros((2, 2)), np.ones(2))

    def test_dual_elimination_agrees_with_float_solve(self):
        rng = np.random.default_rng(6)
        A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        b = rng.normal(size=4)
        tag = next_tag()
        lifted = np.array([DualScalar(tag, float(bi), (0.0,)) for bi in b], dtype=object)
        np.testing.assert_allclose([primal(v) for v in solve(A, lifted)], solve(A, b), rtol=1e-12)

    def test_dual_singular_raises(self):
        tag = next_tag()
        lifted = np.array([DualScalar(tag, 1.0, (1.0,)), DualScalar(tag, 1.0, (0.0,))], dtype=object)
        with self.assertRaises(np.linalg.LinAlgError):
            solve(np.zeros((2, 2)), lifted)
