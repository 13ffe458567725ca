import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehcap.channel import DiscreteDistribution, ExtendedChannel, StateAlphabet
from ehcap.numerics import gaussian_pdf, integrate

from conftest import phi

# binary antipodal AWGN information at amplitude 1.5, from
# ln 2 - E[ln(1 + exp(-2 a Y))], Y ~ N(a, 1), by adaptive quadrature (scipy.integrate.quad)
BINARY_MI_15 = 0.5267773065213734


def test_alphabet_validation():
    with pytest.raises(ValueError):
        StateAlphabet([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        StateAlphabet([-1.0], [1.0])
    with pytest.raises(ValueError):
        StateAlphabet([1.0, 1.0], [1.0, 0.0])
    alpha = StateAlphabet([0.0, 2.0], [0.25, 0.75])
    assert alpha.size == 2
    assert alpha.free_axes.tolist() == [1]


def test_distribution_validation_and_merge():
    with pytest.raises(ValueError):
        DiscreteDistribution([[0.0], [0.0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteDistribution([[0.0], [1.0]], [0.5, 0.4])
    F = DiscreteDistribution.from_arrays([[0.0], [5e-8], [1.0]], [0.25, 0.25, 0.5])
    assert F.size == 2
    np.testing.assert_allclose(F.weights, [0.5, 0.5])


def test_channel_rejects_short_rule():
    from ehcap.numerics import build_rule
    with pytest.raises(ValueError):
        ExtendedChannel(StateAlphabet([3.0], [1.0]), build_rule(1.0, 10, 32))


def test_conditional_density_examples():
    ch = ExtendedChannel.build([0.0], [1.0])
    assert ch.conditional_density([0.0], 0.0) == pytest.approx(0.3989422804, abs=1e-10)
    ch = ExtendedChannel.build([2.0, 2.0], [0.5, 0.5])
    y = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(ch.conditional_density([0.7, 0.7], y), gaussian_pdf(y, 0.7), rtol=1e-14)


def test_conditional_density_mixture(onoff_half):
    # 0.5 p_N(0) + 0.5 p_N(-1.5), evaluated directly
    expected = 0.5 * phi(0.0) + 0.5 * phi(-1.5)
    assert expected == pytest.approx(0.26422993803366224, rel=1e-15)
    assert onoff_half.conditional_density([0.0, 1.5], 0.0) == pytest.approx(expected, rel=1e-13)


def test_output_density_examples(onoff_half):
    ch = ExtendedChannel.build([1.0], [1.0])
    F = DiscreteDistribution.point_mass([0.0])
    y = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(ch.output_density(F, y), gaussian_pdf(y), rtol=1e-14)

    # brute force: sum over support points and states
    F = DiscreteDistribution([[0.0, -1.5], [0.0, 1.5]], [0.5, 0.5])
    brute = sum(0.5 * (0.5 * phi(0.0 - 0.0) + 0.5 * phi(0.0 - t2)) for t2 in (-1.5, 1.5))
    assert onoff_half.output_density(F, 0.0) == pytest.approx(brute, rel=1e-13)


def test_info_density_point_mass_is_zero(static_15):
    F = DiscreteDistribution.point_mass([0.4])
    assert abs(static_15.info_density(F, [0.4])) < 1e-10


def test_info_density_binary(static_15, binary_15):
    i_plus = static_15.info_density(binary_15, [1.5])
    i_minus = static_15.info_density(binary_15, [-1.5])
    assert i_plus == pytest.approx(i_minus, abs=1e-12)
    assert i_plus == pytest.approx(static_15.mutual_information(binary_15), abs=1e-12)
    assert i_plus == pytest.approx(BINARY_MI_15, abs=1e-10)


def test_info_density_vectorised(static_15, binary_15):
    t = np.linspace(-1.5, 1.5, 7)[:, None]
    batch = static_15.info_density(binary_15, t)
    single = [static_15.info_density(binary_15, [v]) for v in t[:, 0]]
    np.testing.assert_allclose(batch, single, rtol=0, atol=1e-14)


def test_info_density_gradient_matches_finite_differences(onoff_half):
    F = DiscreteDistribution([[0.0, -1.2], [0.0, 0.3], [0.0, 1.5]], [0.3, 0.3, 0.4])
    t = np.array([[0.0, 0.8]])
    g = onoff_half.info_density_grad(F, t)[0, 1]
    h = 1e-5
    fd = (onoff_half.info_density(F, [0.0, 0.8 + h]) - onoff_half.info_density(F, [0.0, 0.8 - h])) / (2 * h)
    assert g == pytest.approx(fd, abs=1e-8)


def test_mutual_information_examples(static_15, binary_15):
    assert abs(static_15.mutual_information(DiscreteDistribution.point_mass([1.0]))) < 1e-10
    assert static_15.mutual_information(binary_15) == pytest.approx(BINARY_MI_15, abs=1e-10)


@pytest.mark.slow
def test_mutual_information_monte_carlo(static_15, binary_15, rng):
    # independent sampler: X uniform on {+-1.5}, Y = X + N, log-likelihood ratio average
    n = 10_000_000
    x = np.where(rng.random(n) < 0.5, -1.5, 1.5)
    y = x + rng.standard_normal(n)
    lr = -0.5 * (y - x) ** 2 - np.logaddexp(-0.5 * (y - 1.5) ** 2, -0.5 * (y + 1.5) ** 2) + math.log(2)
    mean, se = lr.mean(), lr.std(ddof=1) / math.sqrt(n)
    assert abs(static_15.mutual_information(binary_15) - mean) <= 3 * se


def _random_distribution(draw_points, weights, amps):
    pts = np.clip(np.array(draw_points), -amps, amps)
    return DiscreteDistribution.from_arrays(pts, weights)


distributions = st.integers(1, 5).flatmap(
    lambda k: st.tuples(
        st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=k, max_size=k),
        st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k),
    )
)
ALPHA_CH = ExtendedChannel.build([1.0, 2.5], [0.3, 0.7])
AMPS = np.array([1.0, 2.5])


def _scaled(points):
    return np.array(points) * AMPS


@pytest.mark.invariant
@given(distributions)
@settings(max_examples=40, deadline=None)
def test_properties_random_distributions(data):
    pts, w = data
    F = DiscreteDistribution.from_arrays(_scaled(pts), np.array(w) / np.sum(w))
    ch = ALPHA_CH
    # output normalisation
    assert abs(integrate(ch.rule, ch.output_density(F, ch.rule.nodes)) - 1.0) < 1e-9
    # mixture identity: entropy route vs information-density route
    mi = ch.mutual_information(F)
    via_density = float(F.weights @ ch.info_density(F, F.points))
    assert abs(mi - via_density) < 1e-12
    # negation symmetry
    assert abs(ch.mutual_information(F.negated()) - mi) < 1e-10
    # non-negativity
    assert mi >= -1e-12


@pytest.mark.invariant
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5, unique=True),
       st.lists(st.floats(0.05, 1), min_size=5, max_size=5))
@settings(max_examples=30, deadline=None)
def test_collapse_to_static_channel(xs, ws):
    xs = np.array(xs)
    w = np.array(ws[: xs.size])
    try:
        F1 = DiscreteDistribution.from_arrays(xs[:, None], w / w.sum())
    except ValueError:
        return
    F2 = DiscreteDistribution(np.repeat(F1.points, 2, axis=1), F1.weights)
    static = ExtendedChannel.build([2.0], [1.0])
    doubled = ExtendedChannel.build([2.0, 2.0], [0.4, 0.6])
    assert abs(static.mutual_information(F1) - doubled.mutual_information(F2)) < 1e-10


@pytest.mark.parametrize("amps, probs", [([1.3], [1.0]), ([0.0, 1.5], [0.5, 0.5]),
                                         ([0.4, 1.0, 2.2], [0.2, 0.3, 0.5])])
def test_lattice_density_matches_pointwise(amps, probs):
    from ehcap.solver import box_lattice, lattice_axes

    ch = ExtendedChannel.build(amps, probs)
    a = np.array(amps)
    F = DiscreteDistribution(np.vstack([a, -a, 0.3 * a]), [0.4, 0.4, 0.2])
    lattice = ch.info_density_lattice(F, lattice_axes(ch.alphabet, 8))
    pointwise = ch.info_density(F, box_lattice(ch.alphabet, 8))
    np.testing.assert_allclose(lattice, pointwise, atol=1e-13)
