"""Acceptance criteria, one test each.

Every test prints a single ``criterion N PASS|FAIL`` line (also collected in
the pytest terminal summary).  Run the file directly to get just the lines::

    python tests/test_acceptance.py
"""

import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.linalg import expm

sys.path.insert(0, str(Path(__file__).parent))

from conftest import (  # noqa: E402
    random_axis,
    random_density,
    random_effect,
    random_hermitian,
    random_spin,
    random_state_vector,
)
from vn1 import (  # noqa: E402
    SZ,
    DiscreteCanonicalDetector,
    GaussianDetector,
    MatrixDetector,
    MeasurementSetup,
    Postselection,
    SystemState,
    discrete_conjugate_pair,
    discrete_wigner,
    exp_phi_S,
    gaussian_moments,
    gaussian_moments_quadrature,
    make_spin1_axis,
    run,
    weak_values,
)
from vn1.detectors import DetectorMoments, fourier_basis  # noqa: E402
from vn1.oracle import evolve_joint, postselect, run_oracle  # noqa: E402
from vn1.weaklimit import convergence_scan, validity_check  # noqa: E402

SEED = 1234


def reference_setup(det, lam=0.01):
    psi = np.array([1, 1j, 0]) / np.sqrt(2)
    phi = np.array([1, 1, 0]) / np.sqrt(2)
    return MeasurementSetup(SystemState.pure(psi), SZ, det, lam, Postselection.pure(phi))


# -- criterion bodies ------------------------------------------------------------


def criterion_1():
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        s = make_spin1_axis(random_axis(rng))
        phi = rng.uniform(-10, 10)
        worst = max(worst, np.max(np.abs(exp_phi_S(s, phi).matrix - expm(1j * phi * s.matrix))))
    elapsed = time.perf_counter() - start
    return worst <= 1e-12 and elapsed < 1.0, f"max error {worst:.2e} (tol 1e-12), {elapsed:.2f} s (limit 1 s)"


def criterion_2():
    rng = np.random.default_rng(SEED + 2)
    start = time.perf_counter()
    worst_p = worst_o = 0.0
    for i in range(100):
        dim = (4, 8, 16, 32)[i % 4]
        det = MatrixDetector(random_density(rng, dim), random_hermitian(rng, dim), random_hermitian(rng, dim))
        setup = MeasurementSetup(
            SystemState(random_density(rng, 3)),
            random_spin(rng),
            det,
            rng.uniform(0, 5),
            Postselection(random_effect(rng, 3)),
        )
        res, orc = run(setup), run_oracle(setup)
        worst_p = max(worst_p, abs(res.p_f - orc.p_f))
        worst_o = max(worst_o, abs(res.avg_output - orc.avg_output))
    elapsed = time.perf_counter() - start
    ok = worst_p <= 1e-10 and worst_o <= 1e-10 and elapsed < 30
    return ok, f"max |dP_f| {worst_p:.2e}, max |d<O>| {worst_o:.2e} (tol 1e-10), {elapsed:.1f} s (limit 30 s)"


def criterion_3():
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    for i in range(50):
        family = i % 3
        if family == 0:
            det = MatrixDetector(random_density(rng, 6), random_hermitian(rng, 6), random_hermitian(rng, 6))
        elif family == 1:
            sq = rng.uniform(0.2, 2.0)
            det = GaussianDetector(rng.normal(), rng.normal(), sq, 0.5 / sq * rng.uniform(1, 3), 0.0)
        else:
            d = int(rng.integers(3, 8))
            det = DiscreteCanonicalDetector(d, random_density(rng, d))
        lam = rng.uniform(0, 5)
        setup = MeasurementSetup(SystemState(random_density(rng, 3)), random_spin(rng), det, lam, Postselection(np.eye(3)))
        worst = max(worst, abs(run(setup).p_f - 1.0))
    return worst <= 1e-12, f"max |P_f - 1| {worst:.2e} over 50 cases, 3 detector families (tol 1e-12)"


def _eigenprojectors(s):
    w, v = np.linalg.eigh(s.matrix)
    return {int(round(x)): np.outer(v[:, i], v[:, i].conj()) for i, x in enumerate(w)}


def _s2_one_basis(pr):
    return np.linalg.eigh(pr[1] + pr[-1])[1][:, 1:]


def _random_block(rng, v):
    c = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = c @ c.conj().T
    return v @ (b / np.linalg.eigvalsh(b)[-1]) @ v.conj().T


def _instance(rng, cls, i):
    """Random (rho, E, S) in the given class; even ``i`` constrains rho, odd ``i`` constrains E."""
    s = random_spin(rng)
    pr = _eigenprojectors(s)
    rho, e = random_density(rng, 3), random_effect(rng, 3)
    if cls == "spin_half_like":
        special = _random_block(rng, _s2_one_basis(pr))
    elif cls == "commutes_with_S":
        special = sum(rng.uniform(0.05, 1.0) * p for p in pr.values())
    elif cls == "commutes_with_S2":
        special = rng.uniform(0.05, 1.0) * pr[0] + _random_block(rng, _s2_one_basis(pr))
    else:
        psi, phi = random_state_vector(rng, 3), random_state_vector(rng, 3)
        return np.outer(psi, psi.conj()), np.outer(phi, phi.conj()), s
    if i % 2 == 0:
        rho = special / np.trace(special).real
    else:
        e = special / np.linalg.eigvalsh(special)[-1]
    return rho, e, s


# the relations exactly as stated for each class
STATED_RELATIONS = {
    "spin_half_like": lambda w: {"C=1": abs(w.C - 1), "D=A": abs(w.D - w.A), "E=1": abs(w.E - 1)},
    "commutes_with_S": lambda w: {
        "A,C,D real": max(abs(w.A.imag), abs(w.C.imag), abs(w.D.imag)),
        "C=B": abs(w.C - w.B),
        "E=B": abs(w.E - w.B),
        "D=A": abs(w.D - w.A),
    },
    "commutes_with_S2": lambda w: {"C real": abs(w.C.imag), "D=A": abs(w.D - w.A), "E=B": abs(w.E - w.B)},
    "pure_pure": lambda w: {
        "B=|A|^2": abs(w.B - abs(w.A) ** 2),
        "E=|C|^2": abs(w.E - abs(w.C) ** 2),
        "D=AC*": abs(w.D - w.A * np.conj(w.C)),
    },
}


def criterion_4():
    rng = np.random.default_rng(SEED + 4)
    worst = {}
    for cls, relations in STATED_RELATIONS.items():
        for i in range(200):
            rho, e, s = _instance(rng, cls, i)
            for name, val in relations(weak_values(rho, e, s)).items():
                worst[(cls, name)] = max(worst.get((cls, name), 0.0), val)
    failed = {k: v for k, v in worst.items() if v > 1e-12}
    # the identity that replaces E=B in the S^2-commuting class
    e_eq_c = 0.0
    for i in range(200):
        w = weak_values(*_instance(rng, "commutes_with_S2", i))
        e_eq_c = max(e_eq_c, abs(w.E - w.C))
    if failed:
        bad = ", ".join(f"{c}:{n} up to {v:.2e}" for (c, n), v in sorted(failed.items()))
        detail = f"violated: {bad}; all other relations <= {max(v for k, v in worst.items() if k not in failed):.1e}"
    else:
        detail = f"max residual {max(worst.values()):.1e}"
    return not failed, detail + f" (S^2-commuting class satisfies E=C to {e_eq_c:.1e})"


def criterion_5():
    rng = np.random.default_rng(SEED + 5)
    worst = 0.0
    for _ in range(50):
        sq = rng.uniform(0.2, 2.0)
        sp = rng.uniform(0.5, 1.5) / sq
        cov = rng.uniform(-1, 1) * np.sqrt(max(sq**2 * sp**2 - 0.25, 0.0))
        det = GaussianDetector(rng.uniform(-1, 1), rng.uniform(-1, 1), sq, sp, cov)
        lam = rng.uniform(0, 3)
        closed, quad = gaussian_moments(det, lam), gaussian_moments_quadrature(det, lam)
        worst = max(worst, max(abs(getattr(closed, k) - getattr(quad, k)) for k in DetectorMoments.BASE))
    return worst <= 1e-8, f"max |closed form - quadrature| {worst:.2e} over 50 pointers (tol 1e-8)"


def criterion_6():
    rng = np.random.default_rng(SEED + 6)
    worst = 0.0
    for d in (3, 4, 5, 8):
        f = fourier_basis(d)
        for _ in range(20):
            rho = random_density(rng, d)
            w = discrete_wigner(DiscreteCanonicalDetector(d, rho))
            worst = max(
                worst,
                np.max(np.abs(w.sum(axis=1) - np.diag(rho).real)),
                np.max(np.abs(w.sum(axis=0) - np.real(np.diag(f.conj().T @ rho @ f)))),
            )
    return worst <= 1e-12, f"max marginal error {worst:.2e} for d in (3, 4, 5, 8) (tol 1e-12)"


def criterion_7():
    worst = 0.0
    for sq in (0.25, 0.5, 1.3):
        det = GaussianDetector(0.0, 0.0, sq, 0.5 / sq, 0.0)
        for vec, s in (([1, 0, 0], 1), ([0, 1, 0], 0), ([0, 0, 1], -1)):
            for lam in (0.1, 1.0, 3.0):
                res = run(MeasurementSetup(SystemState.pure(vec), SZ, det, lam))
                worst = max(worst, abs(res.avg_output - lam * s))
    return worst <= 1e-10, f"max |<P>_f - lambda s| {worst:.2e} (tol 1e-10)"


def criterion_8():
    start = time.perf_counter()
    base = reference_setup(GaussianDetector())
    wv = weak_values(base.system, base.postselection, SZ)
    # Only sigma_Q is fixed.  The covariance is set to -C''/(2C') so the C
    # contribution at order lambda^2 in the readout cancels, which is what
    # lets the C-free interpolation reach third order.
    det = GaussianDetector(0.3, 0.0, 0.5, 1.5, -wv.C.imag / (2 * wv.C.real))
    lambdas = np.logspace(-4, -2, 9)
    scan = convergence_scan(replace(base, detector=det), lambdas)
    sl = scan.slopes
    wcond_exact = all(validity_check(det, lam).wcond_value == 2 * lam * 0.5 for lam in lambdas)
    elapsed = time.perf_counter() - start
    ok = (
        sl["linear"] is not None
        and abs(sl["linear"] - 2) <= 0.2
        and abs(sl["second_order"] - 3) <= 0.3
        and abs(sl["interpolation"] - 3) <= 0.3
        and wcond_exact
        and elapsed < 10
    )
    generic = convergence_scan(replace(base, detector=GaussianDetector(0.3, 0.0, 0.5, 1.5, 0.2)), lambdas).slopes
    detail = (
        f"slopes linear {sl['linear']:.3f}, second order {sl['second_order']:.3f}, "
        f"interpolation {sl['interpolation']:.3f}; wcond == 2 lambda sigma_Q: {wcond_exact}; {elapsed:.2f} s "
        f"[pointer Qbar=0.3, sigma_P=1.5, cov={det.cov_qp:.3g}; with cov=0.2 interpolation slope is "
        f"{generic['interpolation']:.2f}]"
    )
    return ok, detail


def criterion_9():
    worst = 0.0
    for d in (3, 5):
        _, q_op = discrete_conjugate_pair(d)
        det = DiscreteCanonicalDetector.basis_state(d, -(d - 1) / 2)
        for idx, s in ((0, 1), (1, 0), (2, -1)):
            rho_i = np.zeros((3, 3))
            rho_i[idx, idx] = 1.0
            cond = postselect(evolve_joint(rho_i, det.rho, SZ, q_op, 1.0), np.eye(3))
            target = np.zeros((d, d))
            target[s % d, s % d] = 1.0  # label -J (+) S, cyclic
            worst = max(worst, np.max(np.abs(cond.rho_df - target)))
    return worst <= 1e-12, f"max |rho_D|f - |-J+S><-J+S|| {worst:.2e} for d in (3, 5) (tol 1e-12)"


def criterion_10():
    rng = np.random.default_rng(SEED + 10)
    at_one, off_integer = {}, {}
    for d in (3, 5, 7):
        for lam, store in ((1.0, at_one), (0.37, off_integer)):
            worst = 0.0
            for _ in range(5):
                setup = MeasurementSetup(
                    SystemState(random_density(rng, 3)),
                    random_spin(rng),
                    DiscreteCanonicalDetector(d, random_density(rng, d)),
                    lam,
                    Postselection(random_effect(rng, 3)),
                )
                worst = max(worst, abs(run(setup).metadata["wigner_route_difference"]))
            store[d] = worst
    ok = max(at_one.values()) <= 1e-9
    fmt = lambda m: ", ".join(f"d={d}: {v:.2e}" for d, v in m.items())  # noqa: E731
    return ok, f"|Wigner route - exact| at lambda=1: {fmt(at_one)} (tol 1e-9); reported at lambda=0.37: {fmt(off_integer)}"


CRITERIA = {
    1: ("closed exponential vs dense expm", criterion_1),
    2: ("exact formulas vs brute-force oracle", criterion_2),
    3: ("completeness without postselection", criterion_3),
    4: ("special-case weak-value relations", criterion_4),
    5: ("Gaussian moments vs 2-D quadrature", criterion_5),
    6: ("discrete Wigner marginals", criterion_6),
    7: ("eigenstate pointer shift", criterion_7),
    8: ("weak-limit convergence orders", criterion_8),
    9: ("ideal discrete measurement", criterion_9),
    10: ("discrete Wigner route at integer coupling", criterion_10),
}


# -- pytest entry points -----------------------------------------------------------


def _check(number, record_criterion):
    title, body = CRITERIA[number]
    passed, detail = body()
    record_criterion(number, title, passed, detail)
    assert passed, detail


def test_criterion_1_exponential(record_criterion):
    _check(1, record_criterion)


def test_criterion_2_oracle_exactness(record_criterion):
    _check(2, record_criterion)


def test_criterion_3_completeness(record_criterion):
    _check(3, record_criterion)


def test_criterion_4_special_cases(record_criterion):
    _check(4, record_criterion)


def test_criterion_5_gaussian_moments(record_criterion):
    _check(5, record_criterion)


def test_criterion_6_wigner_marginals(record_criterion):
    _check(6, record_criterion)


def test_criterion_7_eigenstate_shift(record_criterion):
    _check(7, record_criterion)


def test_criterion_8_convergence_orders(record_criterion):
    _check(8, record_criterion)


def test_criterion_9_ideal_discrete(record_criterion):
    _check(9, record_criterion)


def test_criterion_10_discrete_wigner_route(record_criterion):
    _check(10, record_criterion)


if __name__ == "__main__":
    failures = 0
    for number, (title, body) in CRITERIA.items():
        passed, detail = body()
        failures += not passed
        print(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
    sys.exit(1 if failures else 0)
