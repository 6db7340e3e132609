import math

import numpy as np
import pytest

from pairgee import (Composition, EvaluationError, InputError, Kernel,
                     aitchison_distance, apply_pseudocount, icc_pair_kernel,
                     mww_indicator, pairwise_responses, sq_half_diff)

from oracles import aitchison_by_hand


# ----------------------------------------------------------- compositions

def test_composition_validation():
    Composition(np.array([0.5, 0.5]))
    with pytest.raises(InputError):
        Composition(np.array([0.5, 0.6]))
    with pytest.raises(InputError):
        Composition(np.array([1.0, 0.0]) / 1.0)
    with pytest.raises(InputError):
        Composition(np.array([1.0]))


def test_apply_pseudocount_additive_zero_is_plain_closure():
    comp = apply_pseudocount(np.array([1.0, 1.0, 2.0]), "additive", 0.0)
    assert np.allclose(comp.values, [0.25, 0.25, 0.5])
    assert not comp.pseudocount_applied


def test_apply_pseudocount_half_min():
    comp = apply_pseudocount(np.array([0.0, 1.0, 1.0]), "half-min")
    assert np.allclose(comp.values, [0.2, 0.4, 0.4])
    assert comp.pseudocount_applied


def test_apply_pseudocount_rejects_bad_input():
    with pytest.raises(InputError):
        apply_pseudocount(np.zeros(3), "half-min")
    with pytest.raises(InputError):
        apply_pseudocount(np.array([0.0, 1.0]), "additive", 0.0)
    with pytest.raises(InputError):
        apply_pseudocount(np.array([-1.0, 1.0]), "half-min")
    with pytest.raises(InputError):
        apply_pseudocount(np.array([1.0, 1.0]), "replace-all")


# ------------------------------------------------------ aitchison distance

def test_aitchison_zero_on_equal_compositions():
    y = np.array([0.1, 0.2, 0.7])
    assert aitchison_distance(y, y) == 0.0


def test_aitchison_hand_computed_value():
    y1 = np.array([0.5, 0.5])
    y2 = np.array([0.8, 0.2])
    # independent hand computation through the log-ratio definition
    assert aitchison_by_hand(y1, y2) == pytest.approx(math.log(2.0) * math.sqrt(2.0),
                                                      rel=1e-12)
    assert aitchison_distance(y1, y2) == pytest.approx(aitchison_by_hand(y1, y2),
                                                       rel=1e-12)
    assert aitchison_distance(y1, y2) == pytest.approx(0.98026, abs=1e-5)


def test_aitchison_scale_invariance():
    rng = np.random.default_rng(7)
    for _ in range(25):
        y1 = rng.dirichlet(np.ones(6))
        y2 = rng.dirichlet(np.ones(6))
        base = aitchison_distance(y1, y2)
        for c in (1e-6, 0.5, 3.0, 1e7):
            scaled = c * y2
            scaled = scaled / scaled.sum()
            assert abs(aitchison_distance(y1, scaled) - base) <= 1e-12 * max(1.0, base)


def test_aitchison_metric_axioms_on_random_triples():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        a, b, c = rng.dirichlet(np.ones(5), size=3)
        dab = aitchison_distance(a, b)
        dba = aitchison_distance(b, a)
        dac = aitchison_distance(a, c)
        dcb = aitchison_distance(c, b)
        assert dab == dba
        assert dab >= 0.0
        assert dab <= dac + dcb + 1e-10


def test_aitchison_input_validation():
    with pytest.raises(InputError):
        aitchison_distance(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(InputError):
        aitchison_distance(np.array([0.2, 0.8]), np.array([0.2, 0.3, 0.5]))


# ----------------------------------------------------------- other kernels

def test_mww_indicator_convention():
    assert mww_indicator(1.0, 2.0) == 1.0
    assert mww_indicator(2.0, 1.0) == 0.0
    # ties count as 1 under the default "<=" convention
    assert mww_indicator(3.0, 3.0) == 1.0
    assert mww_indicator(3.0, 3.0, ties="midrank") == 0.5


def test_sq_half_diff():
    assert sq_half_diff(1.0, 2.0) == 0.5
    assert sq_half_diff(2.0, 2.0) == 0.0


def test_icc_pair_kernel_values_and_symmetry():
    assert icc_pair_kernel([1.0, 1.0], [1.0, 1.0]) == (0.0, 0.0)
    f1, f2 = icc_pair_kernel([1.0, 3.0], [1.0, 1.0])
    assert f1 == pytest.approx(0.5)
    assert f2 == pytest.approx(1.0)
    assert icc_pair_kernel([1.0, 1.0], [1.0, 3.0]) == (f1, f2)
    with pytest.raises(InputError):
        icc_pair_kernel([1.0, 2.0], [1.0, 2.0, 3.0])


# ---------------------------------------------------- vectorised evaluation

def test_pairwise_responses_match_scalar_functions():
    rng = np.random.default_rng(5)
    n = 8
    i1, i2 = np.triu_indices(n, k=1)

    comps = rng.dirichlet(np.ones(4), size=n)
    vals = pairwise_responses(Kernel.aitchison(), comps, i1, i2)
    for k in range(len(i1)):
        assert vals[k] == pytest.approx(aitchison_distance(comps[i1[k]], comps[i2[k]]),
                                        rel=1e-12)

    y = rng.normal(size=(n, 1))
    vals = pairwise_responses(Kernel.mww(), y, i1, i2)
    for k in range(len(i1)):
        assert vals[k] == mww_indicator(y[i1[k], 0], y[i2[k], 0])

    vals = pairwise_responses(Kernel.sqhalfdiff(), y, i1, i2)
    for k in range(len(i1)):
        assert vals[k] == pytest.approx(sq_half_diff(y[i1[k], 0], y[i2[k], 0]))

    ratings = rng.normal(size=(n, 3))
    vals = pairwise_responses(Kernel.icc(), ratings, i1, i2)
    for k in range(len(i1)):
        assert vals[k] == pytest.approx(icc_pair_kernel(ratings[i1[k]],
                                                        ratings[i2[k]]))


def test_mww_midrank_vectorised():
    y = np.array([[1.0], [1.0], [2.0]])
    i1, i2 = np.array([0, 0, 1]), np.array([1, 2, 2])
    vals = pairwise_responses(Kernel.mww(ties="midrank"), y, i1, i2)
    assert np.array_equal(vals, [0.5, 1.0, 1.0])


def test_custom_kernel_failure_carries_pair():
    def bad(y1, y2):
        if y1[0] > 0.5:
            raise ValueError("boom")
        return 0.0

    y = np.array([[0.1], [0.9], [0.2]])
    with pytest.raises(EvaluationError) as err:
        pairwise_responses(Kernel.custom(bad), y, np.array([0, 1]), np.array([1, 2]))
    assert err.value.pair == (1, 2)


def test_custom_kernel_nonfinite_rejected():
    y = np.array([[0.0], [1.0]])
    with pytest.raises(EvaluationError):
        pairwise_responses(Kernel.custom(lambda a, b: float("nan")),
                           y, np.array([0]), np.array([1]))
