import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vn1 import (
    SZ,
    ConsistencyError,
    DiscreteCanonicalDetector,
    GaussianDetector,
    MatrixDetector,
    MeasurementSetup,
    Postselection,
    SystemState,
    ValidationError,
    gaussian_moments,
    make_spin1_axis,
    matrix_operator_averages,
    postselection_probability,
    run,
    validate_operator,
    weak_values,
)
from vn1.engine import canonical_terms, general_terms
from vn1.oracle import compare, run_oracle

from conftest import random_density, random_effect, random_hermitian, random_spin


def random_matrix_setup(rng, dim=8, lam=None):
    det = MatrixDetector(random_density(rng, dim), random_hermitian(rng, dim), random_hermitian(rng, dim))
    lam = rng.uniform(0, 5) if lam is None else lam
    return MeasurementSetup(SystemState(random_density(rng, 3)), random_spin(rng), det, lam, Postselection(random_effect(rng, 3)))


def reference_pair_setup(det, lam):
    psi = np.array([1, 1j, 0]) / np.sqrt(2)
    phi = np.array([1, 1, 0]) / np.sqrt(2)
    return MeasurementSetup(SystemState.pure(psi), make_spin1_axis([0, 0, 1]), det, lam, Postselection.pure(phi))


def test_matrix_detector_agrees_with_oracle(rng):
    for dim in (4, 8, 16):
        setup = random_matrix_setup(rng, dim)
        res, orc = run(setup), run_oracle(setup)
        assert res.p_f == pytest.approx(orc.p_f, abs=1e-12)
        assert res.avg_output == pytest.approx(orc.avg_output, abs=1e-11)


@pytest.mark.parametrize("lam", [0.05, 0.7, 2.5])
def test_gaussian_detector_agrees_with_discretized_oracle(lam):
    setup = reference_pair_setup(GaussianDetector(0.3, 0.1, 0.5, 1.5, 0.5), lam)
    res, orc = run(setup), run_oracle(setup)
    assert orc.error_bar < 1e-10
    assert abs(res.p_f - orc.p_f) <= 1e-10
    assert abs(res.avg_output - orc.avg_output) <= 1e-10


def test_general_and_canonical_routes_agree_for_gaussian():
    det = GaussianDetector(-0.2, 0.4, 0.6, 1.2, 0.3)
    setup = reference_pair_setup(det, 1.1)
    canonical = run(setup)
    general = run(replace(setup, detector=det.discretize(384), readout="explicit"))
    assert canonical.p_f == pytest.approx(general.p_f, abs=1e-11)
    assert canonical.avg_output == pytest.approx(general.avg_output, abs=1e-11)
    for label in canonical.terms:
        assert canonical.terms[label] == pytest.approx(general.terms[label], abs=1e-11), label


def test_discrete_detector_agrees_with_oracle(rng):
    for d in (3, 4, 5):
        det = DiscreteCanonicalDetector(d, random_density(rng, d))
        setup = MeasurementSetup(SystemState(random_density(rng, 3)), random_spin(rng), det, 1.0, Postselection(random_effect(rng, 3)))
        res, orc = run(setup), run_oracle(setup)
        assert res.avg_output == pytest.approx(orc.avg_output, abs=1e-12)
        assert "wigner_route_difference" in res.metadata


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["matrix", "gaussian", "discrete"]))
def test_no_postselection_means_certain_success(seed, family):
    rng = np.random.default_rng(seed)
    if family == "matrix":
        det = MatrixDetector(random_density(rng, 5), random_hermitian(rng, 5), random_hermitian(rng, 5))
    elif family == "gaussian":
        sq = rng.uniform(0.2, 2)
        det = GaussianDetector(rng.normal(), rng.normal(), sq, 0.5 / sq + rng.uniform(0, 1), 0.0)
    else:
        det = DiscreteCanonicalDetector(4, random_density(rng, 4))
    setup = MeasurementSetup(SystemState(random_density(rng, 3)), random_spin(rng), det, rng.uniform(0, 5))
    assert abs(run(setup).p_f - 1.0) <= 1e-12


@pytest.mark.parametrize("s_value, vec", [(1, [1, 0, 0]), (0, [0, 1, 0]), (-1, [0, 0, 1])])
@pytest.mark.parametrize("lam", [0.1, 1.0, 3.0])
def test_eigenstate_shifts_pointer(s_value, vec, lam):
    det = GaussianDetector.pure(0.5)
    res = run(MeasurementSetup(SystemState.pure(vec), SZ, det, lam))
    assert res.avg_output == pytest.approx(lam * s_value, abs=1e-10)


def test_spin_half_matches_two_branch_formula(rng):
    # S = sigma_z: U = exp(i lambda Q) on |up>, exp(-i lambda Q) on |down>
    sz = validate_operator(np.diag([1.0, -1.0]))
    rho, e = random_density(rng, 2), random_effect(rng, 2)
    dim = 6
    rho_d, q, o = random_density(rng, dim), random_hermitian(rng, dim), random_hermitian(rng, dim)
    lam = 0.8
    w, v = np.linalg.eigh(q)
    branch = {a: (v * np.exp(1j * a * lam * w)) @ v.conj().T for a in (1, -1)}
    cond = sum(e[b, a] * rho[a, b] * branch[sa] @ rho_d @ branch[sb].conj().T
               for a, sa in enumerate((1, -1)) for b, sb in enumerate((1, -1)))
    p_ref = np.trace(cond).real
    avg_ref = np.trace(o @ cond).real / p_ref
    res = run(MeasurementSetup(SystemState(rho), sz, MatrixDetector(rho_d, q, o), lam, Postselection(e)))
    assert res.p_f == pytest.approx(p_ref, abs=1e-12)
    assert res.avg_output == pytest.approx(avg_ref, abs=1e-12)


def test_result_decomposition(rng):
    res = run(random_matrix_setup(rng))
    assert set(res.terms) == {"A'", "A''", "C'", "C''", "B", "D'", "D''", "E"}
    assert res.avg_output == pytest.approx(res.offset + res.prefactor * math.fsum(res.terms.values()), abs=1e-14)
    assert res.prefactor == pytest.approx(res.weak_values.omega / res.p_f)


def test_average_is_linear_in_postselection_before_normalization(rng):
    setup = random_matrix_setup(rng)
    e1, e2 = random_effect(rng, 3), random_effect(rng, 3)
    r1 = run(replace(setup, postselection=Postselection(e1)))
    r2 = run(replace(setup, postselection=Postselection(e2)))
    r12 = run(replace(setup, postselection=Postselection(0.5 * e1 + 0.3 * e2)))
    assert r12.p_f == pytest.approx(0.5 * r1.p_f + 0.3 * r2.p_f, abs=1e-13)
    num = lambda r: r.p_f * r.avg_output  # noqa: E731
    assert num(r12) == pytest.approx(0.5 * num(r1) + 0.3 * num(r2), abs=1e-12)


def test_published_sign_of_d_terms_disagrees_with_oracle(rng):
    setup = random_matrix_setup(rng, 6, lam=1.7)
    wv = weak_values(setup.system, setup.postselection, setup.observable)
    oa = matrix_operator_averages(setup.detector, setup.coupling)
    p_f = postselection_probability(wv, oa)
    terms = general_terms(wv, oa)
    flipped = dict(terms, **{"D'": -terms["D'"], "D''": -terms["D''"]})
    orc = run_oracle(setup)
    ours = oa.o_mean + wv.omega / p_f * math.fsum(terms.values())
    literal = oa.o_mean + wv.omega / p_f * math.fsum(flipped.values())
    assert abs(ours - orc.avg_output) <= 1e-11
    assert abs(literal - orc.avg_output) > 1e-3


def test_published_canonical_d_and_e_terms_disagree_with_oracle():
    det = GaussianDetector(0.2, 0.0, 0.5, 1.5, 0.5)
    setup = reference_pair_setup(det, 1.3)
    wv = weak_values(setup.system, setup.postselection, setup.observable)
    m = gaussian_moments(det, setup.coupling)
    terms = canonical_terms(wv, m)
    literal = dict(terms)
    literal["D'"] = m.cos_one_minus_cos * wv.D.real
    literal["E"] = m.one_minus_cos_sq * wv.E
    p_f = postselection_probability(wv, m)
    orc = run_oracle(setup)
    assert abs(wv.omega / p_f * math.fsum(terms.values()) - orc.avg_output) <= 1e-10
    assert abs(wv.omega / p_f * math.fsum(literal.values()) - orc.avg_output) > 1e-3


def test_sign_flip_mutation_is_pinpointed(rng):
    setup = random_matrix_setup(rng, 6, lam=2.0)
    res, orc = run(setup), run_oracle(setup)
    for label in ("A''", "B", "D'"):
        val = res.terms[label]
        mutated = replace(
            res,
            terms=dict(res.terms, **{label: -val}),
            avg_output=res.avg_output - 2 * res.prefactor * val,
        )
        report = compare(mutated, orc, tol=1e-9)
        assert not report.passed
        assert label in report.suspects


def test_orthogonal_postselection_raises():
    from vn1 import OrthogonalityError

    setup = MeasurementSetup(SystemState.pure([1, 0, 0]), SZ, GaussianDetector(), 0.5, Postselection.pure([0, 0, 1]))
    with pytest.raises(OrthogonalityError):
        run(setup)


def test_inconsistent_inputs_raise():
    wv = weak_values(np.eye(3) / 3, None, SZ)
    oa = matrix_operator_averages(MatrixDetector(np.eye(2) / 2, np.eye(2), np.eye(2)), 1.0)
    bad = replace(oa, t=50.0)
    with pytest.raises(ConsistencyError):
        postselection_probability(wv, bad)


def test_setup_validation(rng):
    det = GaussianDetector()
    with pytest.raises(ValidationError, match="dimension mismatch"):
        MeasurementSetup(SystemState(random_density(rng, 2)), SZ, det, 0.3)
    with pytest.raises(ValidationError, match="readout"):
        MeasurementSetup(SystemState(random_density(rng, 3)), SZ, det, 0.3, readout="explicit")
    with pytest.raises(ValidationError, match="finite"):
        MeasurementSetup(SystemState(random_density(rng, 3)), SZ, det, float("nan"))


def test_readout_offset_is_restored():
    setup = reference_pair_setup(GaussianDetector(0.0, 2.0, 0.5, 1.0), 0.4)
    shifted = run(setup)
    base = run(replace(setup, detector=GaussianDetector(0.0, 0.0, 0.5, 1.0)))
    assert shifted.avg_output == pytest.approx(base.avg_output + 2.0, abs=1e-13)
    assert shifted.offset == 2.0
