import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taupath.errors import EvaluationError, ModelError, ModelSyntaxError
from taupath.expr import parse_expression
from taupath.model import (BUNDLED_MODELS, apply_stoichiometry, differentiate_propensity,
                           evaluate_propensity, load_model, parse_model)

BIRTH_DEATH = """\
species: X
param theta1 = 10
param theta2 = 0.1
reaction: -> X @ theta1
reaction: X -> @ theta2*X
observable: X
init: 0
"""


def test_birth_death_stoichiometry(birth_death):
    assert birth_death.species == ("X",)
    assert birth_death.param_names == ("theta1", "theta2")
    assert birth_death.stoichiometry.tolist() == [[1], [-1]]


def test_repressilator_shape(repressilator):
    assert repressilator.n_species == 6
    assert repressilator.n_reactions == 12
    s = repressilator.stoichiometry
    # each mRNA and protein has one production and one decay channel
    assert sorted(s.sum(axis=0).tolist()) == [0] * 6
    assert (np.abs(s).sum(axis=1) == 1).all()


def test_multiplicities_and_catalysts():
    net = parse_model("species: A B\nreaction: 2A + B -> A + 3B @ 1\nobservable: B\ninit: 1 1\n")
    assert net.stoichiometry.tolist() == [[-1, 2]]


def test_species_order_follows_declaration():
    net = parse_model("species: Z A\nreaction: A -> Z @ A\nobservable: Z\ninit: 0 4\n")
    assert net.species == ("Z", "A")
    assert net.state_vector().tolist() == [0, 4]


def test_comments_and_blank_lines():
    text = "# header\n\n" + BIRTH_DEATH.replace("observable: X", "observable: X  # count")
    assert parse_model(text).n_reactions == 2


def test_undeclared_species():
    with pytest.raises(ModelError, match="Q"):
        parse_model(BIRTH_DEATH.replace("theta2*X", "theta2*Q"))


def test_undeclared_species_in_reaction_side():
    with pytest.raises(ModelError, match="Q"):
        parse_model(BIRTH_DEATH.replace("X -> @", "Q -> @"))


@pytest.mark.parametrize("text", [
    "species: X X\nreaction: -> X @ 1\nobservable: X\n",
    "species: X\nparam a = 1\nparam a = 2\nreaction: -> X @ a\nobservable: X\n",
])
def test_duplicates(text):
    with pytest.raises(ModelError, match="duplicate"):
        parse_model(text)


def test_empty_network():
    with pytest.raises(ModelError):
        parse_model("species: X\nobservable: X\n")
    with pytest.raises(ModelError):
        parse_model("")


def test_syntax_error_reports_position():
    with pytest.raises(ModelSyntaxError) as info:
        parse_model(BIRTH_DEATH.replace("theta2*X", "theta2*(X"))
    assert info.value.line == 5
    assert info.value.col > 0


def test_missing_arrow():
    with pytest.raises(ModelSyntaxError) as info:
        parse_model(BIRTH_DEATH.replace("X -> @", "X @"))
    assert info.value.line == 5


def test_unknown_statement():
    with pytest.raises(ModelSyntaxError):
        parse_model("species: X\nfoo: bar\n")


def test_propensity_examples(birth_death, repressilator):
    assert evaluate_propensity(birth_death, 0, [37]) == 10.0
    assert evaluate_propensity(birth_death, 1, [0]) == 0.0
    assert evaluate_propensity(repressilator, 0, [0] * 6) == 101.0


def test_negative_propensity_rejected():
    net = parse_model("species: X\nparam a = 1\nreaction: -> X @ a - X\nobservable: X\ninit: 0\n")
    assert evaluate_propensity(net, 0, [0]) == 1.0
    with pytest.raises(EvaluationError, match="negative"):
        evaluate_propensity(net, 0, [3])


def test_division_by_zero_rejected():
    net = parse_model("species: X\nreaction: -> X @ 1/X\nobservable: X\ninit: 0\n")
    with pytest.raises(EvaluationError):
        evaluate_propensity(net, 0, [0])


def test_derivative_linear(birth_death):
    d = differentiate_propensity(birth_death, 1, "theta2")
    assert d.evaluate(birth_death.env([7])) == 7.0
    assert differentiate_propensity(birth_death, 0, "theta2").evaluate(birth_death.env([7])) == 0.0


def test_derivative_cached(birth_death):
    assert differentiate_propensity(birth_death, 1, "theta2") is differentiate_propensity(
        birth_death, 1, "theta2")


def test_hill_derivative(repressilator):
    d = differentiate_propensity(repressilator, 0, "alpha1")
    p2 = repressilator.species.index("P2")
    x = [0] * 6
    x[p2] = 1
    assert d.evaluate(repressilator.env(x)) == 0.0
    x[p2] = 2
    expected = -100 * 2 * math.log(2) / 9
    assert d.evaluate(repressilator.env(x)) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(-15.403, abs=5e-4)


def test_zero_base_positive_exponent():
    e = parse_expression("x^a")
    assert e.evaluate({"x": 0.0, "a": 2.5}) == 0.0
    assert e.diff("a").evaluate({"x": 0.0, "a": 2.5}) == 0.0


def test_zero_base_nonpositive_exponent_is_error():
    with pytest.raises(EvaluationError):
        parse_expression("x^a").evaluate({"x": 0.0, "a": -1.0})


def test_mass_action_derivative_exact():
    net = parse_model("species: A B\nparam k = 0.37\nreaction: A + B -> @ k*A*B\n"
                      "observable: A\ninit: 3 4\n")
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.integers(0, 1000, size=2)
        assert net.derivative(0, "k").evaluate(net.env(x)) == float(x[0]) * float(x[1])


def test_unknown_parameter(birth_death):
    with pytest.raises(ModelError):
        birth_death.derivative(0, "nope")


def test_apply_stoichiometry_examples():
    y, clamped = apply_stoichiometry([5], [-1], 2)
    assert y.tolist() == [3] and not clamped
    y, clamped = apply_stoichiometry([1], [-1], 3)
    assert y.tolist() == [0] and clamped
    y, clamped = apply_stoichiometry([4, 2], [1, -1], 0)
    assert y.tolist() == [4, 2] and not clamped
    with pytest.raises(ValueError):
        apply_stoichiometry([1], [1], -1)


def test_with_parameters(birth_death):
    other = birth_death.with_parameters(theta2=0.2)
    assert other.parameters["theta2"] == 0.2
    assert birth_death.parameters["theta2"] == 0.1
    with pytest.raises(ModelError):
        birth_death.with_parameters(nope=1)


def test_load_model_from_path(tmp_path):
    path = tmp_path / "bd.model"
    path.write_text(BIRTH_DEATH)
    assert load_model(path).n_reactions == 2
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "missing.model")


def _random_point(net, data, positive_bases=True):
    x = [data.draw(st.integers(1 if positive_bases else 0, 500)) for _ in net.species]
    p = {name: data.draw(st.floats(0.5, 3.0)) * (1 if v >= 0 else -1) * max(1.0, abs(v))
         for name, v in net.parameters.items()}
    return x, p


@settings(max_examples=200, deadline=None)
@given(data=st.data(), name=st.sampled_from(["repressilator", "toggle_switch", "birth_death"]))
def test_symbolic_derivative_matches_finite_difference(data, name):
    net = load_model(name)
    x, p = _random_point(net, data)
    k = data.draw(st.integers(0, net.n_reactions - 1))
    theta = data.draw(st.sampled_from(net.param_names))
    h = 1e-6 * max(1.0, abs(p[theta]))
    up = evaluate_propensity(net, k, x, {**p, theta: p[theta] + h})
    down = evaluate_propensity(net, k, x, {**p, theta: p[theta] - h})
    fd = (up - down) / (2 * h)
    sym = net.derivative(k, theta).evaluate(net.env(x, p))
    # absolute floor covers derivatives that vanish or sit at rounding level
    scale = max(abs(evaluate_propensity(net, k, x, p)), 1.0)
    assert sym == pytest.approx(fd, rel=1e-4, abs=1e-7 * scale)


@pytest.mark.parametrize("name", BUNDLED_MODELS)
def test_round_trip(name):
    net = load_model(name)
    again = parse_model(net.to_text())
    assert np.array_equal(net.stoichiometry, again.stoichiometry)
    assert again.parameters == net.parameters
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.integers(0, 200, size=net.n_species)
        for k in range(net.n_reactions):
            assert evaluate_propensity(again, k, x) == evaluate_propensity(net, k, x)
        assert again.observable.evaluate(again.env(x)) == net.observable.evaluate(net.env(x))


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_compiled_propensities_match_tree_evaluation(data):
    from taupath.vm import rates_into

    net = load_model(data.draw(st.sampled_from(["repressilator", "toggle_switch"])))
    x, p = _random_point(net, data, positive_bases=False)
    rates = np.empty(net.n_reactions)
    stack = np.empty(net.compiled.depth + 2)
    rates_into(net.compiled.prop, net.state_vector(x), net.param_vector(p), stack, rates)
    expected = [evaluate_propensity(net, k, x, p) for k in range(net.n_reactions)]
    assert rates == pytest.approx(expected, rel=1e-12)
