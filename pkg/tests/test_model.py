import numpy as np
import pytest

from halfline_bvp.model import (BoundFamily, BracketPair, MultipointProblem, check_bound_family,
                                check_nontriviality, validate_problem)


def test_example_problem_is_admissible(problem):
    rep = validate_problem(problem)
    assert rep.passed, str(rep)
    assert problem.m == 3 and problem.xi_last == 0.11


@pytest.mark.parametrize("alphas, xis, failing", [
    ([0.5, 0.4], [0.0, 1.0], "resonance sum(alpha) = 1"),
    ([0.5, 0.5], [0.1, 1.0], "xi_1 = 0"),
    ([0.5, 0.5], [0.0, 0.0], "xi strictly increasing"),
    ([1.5, -0.5], [0.0, 1.0], "alpha_i > 0"),
])
def test_invalid_problems_name_the_violation(alphas, xis, failing):
    rep = validate_problem(MultipointProblem(alphas, xis, "0"))
    assert [c.name for c in rep.failures()] == [failing]


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        MultipointProblem([0.5, 0.5], [0.0], "0")


def test_nontriviality(problem):
    assert check_nontriviality(problem, [0.0, 1.0]) == 0.0
    trivial = MultipointProblem([1.0], [0.0], "x*y")
    assert check_nontriviality(trivial, np.linspace(0, 5, 11)) is None
    with pytest.raises(ValueError):
        check_nontriviality(problem, [])


def test_bound_family_checks(bounds):
    assert check_bound_family(bounds).passed
    # bounded but not integrable: fails as an L1 family
    assert not check_bound_family(BoundFamily("L1", bounds.phi)).passed
    assert check_bound_family(BoundFamily("L1", "exp(-t)*(1 + r)")).passed
    assert not check_bound_family(BoundFamily("Linf", "sin(t) * r")).passed
    with pytest.raises(ValueError):
        BoundFamily("L2", "r")


def test_bracket_ordering(bracket):
    grid = np.linspace(0, 20, 201)
    assert bracket.ordered_on(grid)
    assert not BracketPair("1", bracket.alpha_low).ordered_on(grid)
    assert bracket.upper(grid).shape == grid.shape
    assert bracket.lower(0.0) == pytest.approx(-0.0075)
