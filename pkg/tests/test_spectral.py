import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from branching_clt import catalog
from branching_clt.errors import MissingBlock, NegativeTime, Reducible, TieUnresolved
from branching_clt.expm import expm
from branching_clt.model import JordanDesign, build_model, from_jordan_design
from branching_clt.spectral import (
    adjoint_semigroup,
    block_polynomial,
    classify_function,
    inner,
    mean_semigroup,
    spectral_decompose,
)

seeds = st.integers(0, 10_000)
kinds = st.sampled_from([(False, False), (True, False), (False, True), (True, True)])


def designed(seed, kind):
    complex_pair, jordan2 = kind
    design = catalog.random_design(seed, complex_pair=complex_pair, jordan2=jordan2)
    model = from_jordan_design(design)
    return design, model, spectral_decompose(model)


# ---------------------------------------------------------------- semigroup


def test_semigroup_at_zero_is_identity(critical_example):
    m, _ = critical_example
    f = np.array([0.3, -1.2])
    np.testing.assert_allclose(mean_semigroup(m, 0.0, f), f, rtol=0, atol=1e-15)
    np.testing.assert_allclose(adjoint_semigroup(m, 0.0, f), f, rtol=0, atol=1e-15)


def test_yule_semigroup_closed_form(yule):
    m, _ = yule
    assert mean_semigroup(m, 1.0, [1.0])[0] == pytest.approx(math.e, rel=1e-12)


def test_negative_time_rejected(critical_example):
    m, _ = critical_example
    with pytest.raises(NegativeTime):
        mean_semigroup(m, -0.1, [1.0, 1.0])
    with pytest.raises(NegativeTime):
        adjoint_semigroup(m, -0.1, [1.0, 1.0])


@given(seeds, kinds, st.floats(0.0, 2.0))
def test_adjoint_identity(seed, kind, t):
    _, model, _ = designed(seed, kind)
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=(2, model.n))
    lhs = inner(mean_semigroup(model, t, f), g, model.m)
    rhs = inner(f, adjoint_semigroup(model, t, g), model.m)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_adjoint_fixes_left_eigenfunction(models):
    for name in ("critical_example", "four_regimes", "complex_critical"):
        m, d = models[name]
        out = adjoint_semigroup(m, 0.7, d.psi1)
        np.testing.assert_allclose(out, np.exp(-d.lam1 * 0.7) * d.psi1, rtol=1e-12)


@given(seeds, kinds, st.floats(0.01, 3.0))
def test_positivity(seed, kind, t):
    _, model, _ = designed(seed, kind)
    assert np.all(expm(t * model.L) > 0)


@given(seeds, kinds, st.floats(0.0, 1.5), st.floats(0.0, 1.5))
def test_composition(seed, kind, s, t):
    _, model, _ = designed(seed, kind)
    f = np.random.default_rng(seed).normal(size=model.n)
    lhs = mean_semigroup(model, s, mean_semigroup(model, t, f))
    rhs = mean_semigroup(model, s + t, f)
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


# ---------------------------------------------------------------- decomposition


def test_yule_decomposition(yule):
    m, d = yule
    assert len(d.blocks) == 1
    assert d.lam1 == -1.0
    assert d.phi1[0] == pytest.approx(1.0)
    assert inner(d.phi1, d.psi1, m.m) == pytest.approx(1.0)


def test_critical_example_by_hand(critical_example):
    m, d = critical_example
    s2 = math.sqrt(2)
    assert d.lam1 == pytest.approx(-2.0, abs=1e-12)
    assert d.block(2).lam == pytest.approx(-1.0, abs=1e-12)
    np.testing.assert_allclose(d.phi1, [1 / s2, 1 / s2], atol=1e-12)
    np.testing.assert_allclose(d.psi1, [s2 / 3, 2 * s2 / 3], atol=1e-12)
    np.testing.assert_allclose(d.block(2).Phi[:, 0], [2, -1], atol=1e-12)
    np.testing.assert_allclose(d.block(2).Psi[:, 0], [1 / 3, -1 / 3], atol=1e-12)
    assert inner(d.block(2).Phi[:, 0], d.block(2).Psi[:, 0], m.m) == pytest.approx(1.0)


def test_inferred_matches_hand_solution():
    m = build_model({"Q": [[-2 / 3, 2 / 3], [1 / 3, -1 / 3]], "beta": 2.0, "offspring": [0, 0, 1]})
    d = spectral_decompose(m)
    assert not d.declared
    np.testing.assert_allclose(d.lams.real, [-2, -1], atol=1e-12)
    np.testing.assert_allclose(d.phi1, [1 / math.sqrt(2)] * 2, atol=1e-12)
    v = d.block(2).Phi[:, 0] * d.block(2).Psi[:, 0].conj()
    assert v.sum() == pytest.approx(1.0)


def test_complex_pair_embedding(models):
    m, d = models["complex_example"]
    mu = np.sort_complex(np.linalg.eigvals(m.L))
    np.testing.assert_allclose(mu, np.sort_complex(np.array([1, 0.3 - 0.4j, 0.3 + 0.4j])), atol=1e-12)
    b2, b3 = d.block(2), d.block(3)
    assert b2.lam.imag < 0 < b3.lam.imag or b3.lam.imag < 0 < b2.lam.imag
    assert b2.partner == 3 and b3.partner == 2


@given(seeds, kinds)
def test_round_trip_against_design(seed, kind):
    design, _, d = designed(seed, kind)
    want = sorted((complex(-mu).real, complex(-mu).imag, s) for mu, s in design.blocks)
    if any(complex(mu).imag for mu, _ in design.blocks):
        # a declared complex block stands for the conjugate pair
        want += [(re, -im, s) for re, im, s in want if im]
        want.sort()
    got = sorted((b.lam.real, b.lam.imag, b.width) for b in d.blocks)
    assert len(got) == len(want)
    for (gr, gi, gs), (wr, wi, ws) in zip(got, want):
        assert abs(gr - wr) < 1e-9 and abs(gi - wi) < 1e-9 and gs == ws


@given(seeds, kinds)
def test_biorthogonality(seed, kind):
    _, _, d = designed(seed, kind)
    assert d.biorthogonality_residual() < 1e-9
    assert d.Phi.shape[1] == d.Phi.shape[0]


@pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
@given(seed=seeds, kind=kinds)
def test_block_action(t, seed, kind):
    _, model, d = designed(seed, kind)
    for b in d.blocks:
        lhs = mean_semigroup(model, t, b.Phi)
        rhs = np.exp(-b.lam * t) * (b.Phi @ block_polynomial(b, t))
        err = np.abs(lhs - rhs).max()
        if t <= 1.0:
            assert err < 1e-9
        else:
            # exp(5 L) reaches e^40; hold the error relative to the leading growth
            assert err < 1e-9 * math.exp(-d.lam1 * t)


@given(seeds, kinds)
def test_reconstruction(seed, kind):
    _, model, d = designed(seed, kind)
    f = np.random.default_rng(seed + 1).normal(size=model.n)
    rebuilt = sum(b.Phi @ c for b, c in zip(d.blocks, d.coefficients(f).values()))
    np.testing.assert_allclose(rebuilt, f, rtol=0, atol=1e-9)


@given(seeds)
def test_conjugate_pairing_of_coefficients(seed):
    _, model, d = designed(seed, (True, False))
    f = np.random.default_rng(seed).normal(size=model.n)
    prof = classify_function(d, f)
    for b in d.blocks:
        if not b.is_real:
            np.testing.assert_allclose(prof.coefficients[b.partner], np.conj(prof.coefficients[b.index]),
                                       rtol=0, atol=1e-12 * max(1.0, np.abs(f).max()))


def test_inferred_agrees_with_declared_on_simple_spectra():
    for seed in range(12):
        _, model, declared = designed(seed, (seed % 2 == 1, False))
        bare = build_model({"Q": model.Q, "beta": model.beta.tolist(), "offspring": model.offspring.tolist(),
                            "m": model.m.tolist()})
        inferred = spectral_decompose(bare)
        np.testing.assert_allclose(inferred.lams, declared.lams, atol=1e-9)
        np.testing.assert_allclose(inferred.phi1, declared.phi1, atol=1e-9)
        assert inferred.biorthogonality_residual() < 1e-9


def test_semigroup_from_expansion(models):
    m, d = models["jordan_three"]
    f = np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(d.semigroup(0.8, f), mean_semigroup(m, 0.8, f), rtol=1e-10)


# ---------------------------------------------------------------- block polynomial


def test_block_polynomial_examples(models):
    _, d = models["jordan_three"]
    assert block_polynomial(d.block(1), 4.2).tolist() == [[1.0]]
    np.testing.assert_array_equal(block_polynomial(d.block(2), 3.0), [[1, 3], [0, 1]])
    b = d.block(2)
    np.testing.assert_allclose(block_polynomial(b, 2.0) @ block_polynomial(b, 5.0), block_polynomial(b, 7.0),
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(block_polynomial(b, -1.5) @ block_polynomial(b, 1.5), np.eye(2), rtol=0, atol=1e-12)


# ---------------------------------------------------------------- errors


def test_reducible_chain():
    Q = [[-1, 1, 0, 0], [1, -1, 0, 0], [0, 0, -1, 1], [0, 0, 1, -1]]
    with pytest.raises(Reducible):
        spectral_decompose(build_model({"Q": Q, "beta": 1.0, "offspring": [0, 0, 1]}))


def test_coincident_exponentials_raise():
    # the pair 0.5 +- 2 pi i has a single value of exp(-lambda)
    P = np.column_stack([np.ones(3), catalog._CIRC_RE, catalog._CIRC_IM])
    design = JordanDesign(P=P, blocks=[(12.0, 1), (complex(0.5, 2 * np.pi), 1)], A_target=25.0, beta_policy="p123")
    with pytest.raises(TieUnresolved):
        spectral_decompose(from_jordan_design(design))


def test_missing_block(critical_example):
    _, d = critical_example
    with pytest.raises(MissingBlock):
        d.block(3)
    with pytest.raises(MissingBlock):
        d.block(0)


# ---------------------------------------------------------------- classification


def test_classify_leading_eigenfunction(critical_example):
    _, d = critical_example
    prof = classify_function(d, d.phi1)
    assert (prof.gamma, prof.zeta, prof.tau, prof.regime) == (1, 1, 0, "large")
    assert prof.leading[1][0] == pytest.approx(1.0)


def test_classify_critical_example(critical_example):
    _, d = critical_example
    prof = classify_function(d, np.array([2.0, -1.0]))
    assert (prof.gamma, prof.tau, prof.regime) == (2, 0, "critical")
    assert prof.coefficients[2][0] == pytest.approx(1.0)
    assert np.all(prof.coefficients[1] == 0)


def test_classify_after_projection_removal(models):
    _, d = models["four_regimes"]
    f = np.array([1.0, 2.0, -0.5, 3.0])
    for k in (1, 2):
        b = d.block(k)
        f = f - (b.Phi @ b.coefficients(f, d.m)).real
    prof = classify_function(d, f)
    assert prof.gamma == 3 and prof.regime == "small"


def test_classify_zero_function(critical_example):
    _, d = critical_example
    prof = classify_function(d, np.zeros(2))
    assert math.isinf(prof.gamma) and prof.regime == "small"


def test_jordan_chain_degree(models):
    _, d = models["jordan_three"]
    b = d.block(2)
    top = classify_function(d, b.Phi[:, 1].real)
    assert top.gamma == 2 and top.tau == 1
    bottom = classify_function(d, b.Phi[:, 0].real)
    assert bottom.tau == 0


@given(seeds, kinds)
def test_projections_sum_to_function(seed, kind):
    _, model, d = designed(seed, kind)
    f = np.random.default_rng(seed).normal(size=model.n)
    prof = classify_function(d, f)
    total = prof.projections["large"] + prof.projections["critical"] + prof.projections["small"]
    np.testing.assert_allclose(total, f, rtol=0, atol=1e-12)
    assert prof.regime == "large"
    assert any(np.any(v != 0) for v in prof.leading.values())
