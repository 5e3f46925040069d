"""Acceptance criteria, one test per criterion.

Each test prints ``ACCEPTANCE n PASS|FAIL ...``; the lines are collected
again in the pytest terminal summary.  Run this file directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""

import json
import sys
from pathlib import Path

import numpy as np

from waverec import bloch, cli, detect, estimate, identify, linop, measure, oracle, states

FIXTURES = Path(cli.__file__).parent / "fixtures"


def random_bloch_point(rng, nu_range=(0.1, 1.0)):
    nu = rng.uniform(*nu_range)
    r = rng.normal(size=3)
    return bloch.BlochPoint(nu, nu * rng.uniform(0.0, 1.0) * r / np.linalg.norm(r))


def test_01_helstrom_pair(acceptance_log):
    p0 = np.array([1.0, 0.0])
    p1 = np.array([0.6, 0.8])
    c = 0.5 * np.outer(p1, p1) - 0.5 * np.outer(p0, p0)
    det = detect.optimal_detect(c)
    k_detect = det.kappa + 0.5
    idn = identify.solve_identification([states.Amplitude(p0), states.Amplitude(p1)], weights=[0.5, 0.5])
    # Ground truth from the 2x2 eigenvalues of C: positive eigenvalue (1/2) sqrt(1 - 0.36).
    truth = 0.5 + 0.5 * np.sqrt(1 - 0.6**2)
    err = max(abs(k_detect - truth), abs(idn.kappa - truth))
    gap = max(abs(det.certificate.gap), abs(idn.certificate.gap))
    ok = err < 1e-9 and gap < 1e-9 and det.certificate.passed and idn.certificate.passed
    acceptance_log(1, ok, f"kappa detect={k_detect:.12f} identify={idn.kappa:.12f} err={err:.1e} gap={gap:.1e}")


def test_02_equiangular_srm(acceptance_log):
    closed = identify.equiangular_closed_form(3, 1.0, 0.5)
    srm = identify.srm_equidiagonal(sigma=identify.equiangular_gram(3, 1.0, 0.5)).kappa
    gen = identify.solve_identification(identify.equiangular_amplitudes(3, 1.0, 0.5)).kappa
    vals = [closed, srm, gen]
    spread = max(vals) - min(vals)
    err = max(abs(v - 8 / 3) for v in vals)
    k0 = identify.equiangular_closed_form(3, 1.0, 0.0)
    k1 = identify.equiangular_closed_form(3, 1.0, 1.0)
    approach = [identify.equiangular_closed_form(3, 1.0, 1.0 - 10.0**-j) - 1 for j in range(2, 9)]
    shrinking = all(0 < b < a for a, b in zip(approach, approach[1:]))
    ok = err < 1e-9 and spread < 1e-9 and abs(k0 - 3) < 1e-12 and abs(k1 - 1) < 1e-12 and shrinking
    acceptance_log(2, ok, f"kappa={closed:.12f} err={err:.1e} spread={spread:.1e} gamma0={k0:.6f} gamma1={k1:.6f}")


def test_03_trine(acceptance_log):
    a = 2 * np.pi * np.arange(3) / 3
    pts = [bloch.BlochPoint(1 / 3, [np.cos(t) / 3, 0.0, np.sin(t) / 3]) for t in a]
    sol = bloch.solve_polarizations(pts)
    ops = [p.operator() for p in pts]
    best = oracle.sampled_max_objective(oracle.identification_objective(ops), 2, 3, 10_000, 2024)["best_value"]
    ok = abs(sol.kappa - 2 / 3) < 1e-9 and sol.certificate.max_residual < 1e-8 and best <= sol.kappa + 1e-8
    acceptance_log(3, ok, f"kappa={sol.kappa:.12f} residual={sol.certificate.max_residual:.1e} "
                          f"oracle_best={best:.6f}")


def test_04_bloch_pairs(acceptance_log):
    rng = np.random.default_rng(404)
    worst = 0.0
    count = 0
    while count < 100:
        p, q = random_bloch_point(rng), random_bloch_point(rng)
        if abs(p.nu - q.nu) >= np.linalg.norm(p.r - q.r) - 1e-6:
            continue
        k = 0.5 * (p.nu + q.nu) + 0.5 * np.linalg.norm(p.r - q.r)
        geo = bloch.solve_polarizations([p, q]).kappa
        det = detect.optimal_detect(p.operator() - q.operator()).kappa + q.nu
        worst = max(worst, abs(geo - k), abs(det - k))
        count += 1
    acceptance_log(4, worst < 1e-8, f"pairs={count} max_err={worst:.1e}")


def test_05_dilation_round_trips(acceptance_log):
    rng = np.random.default_rng(505)
    worst_halmos = 0.0
    for i in range(100):
        n = 2 + i % 7
        u = linop.random_unitary(n, rng)
        d = u @ np.diag(rng.uniform(0.0, 1.0, size=n)) @ u.conj().T
        red = measure.neumark_reduce(measure.halmos_dilate(d))
        worst_halmos = max(worst_halmos, float(np.max(np.abs(red.elements[0] - d))))
    worst_indirect = 0.0
    for i in range(20):
        n, k = 2 + i % 4, 2 + i % 3
        m = oracle.random_povm(n, k, [505, i])
        dil = measure.neumark_dilate(m)
        u = measure.neumark_coupling(dil.embed)
        psi0 = np.zeros(n, dtype=complex)
        psi0[0] = 1.0
        ref = dil.embed @ psi0
        ind = measure.indirect_povm(u, np.outer(ref, ref.conj()), dil.projective)
        worst_indirect = max(worst_indirect, float(np.max(np.abs(ind.elements - m.elements))))
    ok = worst_halmos < 1e-10 and worst_indirect < 1e-9
    acceptance_log(5, ok, f"halmos_max_err={worst_halmos:.1e} indirect_max_err={worst_indirect:.1e}")


def test_06_coherent_overlap(acceptance_log):
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(200):
        a, b = (rng.uniform(0, 2) * np.exp(2j * np.pi * rng.uniform()) for _ in range(2))
        fock = np.vdot(states.coherent_vector(a, 64).coeffs, states.coherent_vector(b, 64).coeffs)
        worst = max(worst, abs(fock - states.coherent_overlap(a, b)))
    acceptance_log(6, worst < 1e-10, f"pairs=200 max_err={worst:.1e}")


def test_07_phase_povm(acceptance_log):
    m = identify.phase_povm(16, 64)
    resid = float(np.linalg.norm(m.total() - np.eye(16), 2))
    seq = [identify.phase_completeness_residual(16, n) for n in range(4, 65)]
    # Nonincreasing in the grid size, allowing for rounding in the residual itself.
    monotone = all(b <= a + 1e-13 for a, b in zip(seq, seq[1:]))
    ok = resid < 1e-10 and monotone and seq[11] > 0.5 and seq[12] < 1e-12
    acceptance_log(7, ok, f"residual={resid:.1e} monotone={monotone} r(15)={seq[11]:.3f} r(16)={seq[12]:.1e}")


def test_08_uncertainty_saturation(acceptance_log):
    sq, sp = states.uncertainty_product(states.gaussian_amplitude(1.0, n_points=2048))
    err = abs(sq * sp - 1 / (4 * np.pi))
    g = states.uniform_grid(8.0, 2048)
    q = g.points
    other = states.Amplitude(np.exp(-((q - 1.5) ** 2)) + np.exp(-((q + 1.5) ** 2)), g)
    oq, op = states.uncertainty_product(other)
    ok = err < 1e-6 and oq * op > 1 / (4 * np.pi)
    acceptance_log(8, ok, f"gaussian_err={err:.1e} superposition_product={oq * op:.6f} bound={1 / (4 * np.pi):.6f}")


def test_09_sld_rotation(acceptance_log):
    fam = estimate.rotation_qubit(0.8)
    theta0 = 0.3
    rep = estimate.sld_bound(fam, [theta0])
    bound = float(rep.bound[0, 0])
    rng = np.random.default_rng(909)
    worst = np.inf
    h = 1e-6
    for _ in range(200):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        p = 0.5 * (np.eye(2) + n[0] * estimate.PAULI_X + n[1] * estimate.PAULI_Y + n[2] * estimate.PAULI_Z)
        m = measure.Povm(np.array([p, np.eye(2) - p]), labels=[1.0, -1.0])
        s = np.array([1.0, -1.0])
        mean = lambda t: float(np.dot(m.probabilities(fam([t])), s))
        slope = (mean(theta0 + h) - mean(theta0 - h)) / (2 * h)
        if abs(slope) < 1e-3:
            continue
        est = theta0 + (s - mean(theta0)) / slope
        r, _ = estimate.measurement_covariance(m, est, fam([theta0]), [theta0])
        worst = min(worst, float(r[0, 0]) - bound)
    ok = abs(bound - 1.5625) < 1e-9 and worst >= -1e-6
    acceptance_log(9, ok, f"bound={bound:.12f} min_slack={worst:.2e}")


def test_10_rld_heterodyne(acceptance_log):
    info = estimate.rld_bound(estimate.coherent_family(48), [0.5 + 0.3j]).info[0, 0]
    m = measure.coherent_povm(32, 8.0, 161)
    rep = estimate.efficiency_check(estimate.coherent_family(32), m, lambda a: a, [0.5 + 0.3j], bound="rld",
                                    attain_tol=2e-3)
    r = rep["points"][0]["R"][0, 0]
    slack = rep["points"][0]["slack_max_eig"]
    ok = abs(info - 1) < 2e-3 and rep["attained"] and abs(r - 1) < 2e-3
    acceptance_log(10, ok, f"H={info.real:.10f} R={r.real:.6f} slack={slack:.1e}")


def test_11_bayes_real_amplitude(acceptance_log):
    res = estimate.gaussian_amplitude_bayes(1.0, 2.0, fock_dim=80)
    target = 12 / 11
    err = abs(res.sigma2 - target)
    acceptance_log(11, err < 1e-6 and res.certificate.passed,
                   f"sigma2={res.sigma2:.8f} target={target:.8f} err={err:.1e} (numerical value is 6/11)")


def test_12_heterodyne_bayes(acceptance_log):
    cf = estimate.heterodyne_closed_form(1.0, 3.0)
    moments = estimate.complex_moment_operators(1.0, 3.0, 64)
    numeric = estimate.heterodyne_numeric(1.0, 3.0, measure.coherent_povm(64, 12.0, 160), moments=moments)
    cert = estimate.heterodyne_certificate(1.0, 3.0, moments)
    resid = max(cert["complementarity"], cert["feasibility"])
    ok = abs(cf["sigma2"] - 1.2) < 1e-15 and abs(numeric - 1.2) < 2e-3 and resid < 1e-6
    acceptance_log(12, ok, f"closed={cf['sigma2']:.6f} numeric={numeric:.7f} certificate_residual={resid:.1e}")


def test_13_weak_duality_sweep(acceptance_log):
    draws = 200
    worst_excess = -np.inf
    worst_resid = 0.0
    for i in range(200):
        rng = np.random.default_rng([1300, i])
        n = 2 + i % 5
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        c = a + a.conj().T
        res = detect.optimal_detect(c)
        worst_resid = max(worst_resid, res.certificate.max_residual, abs(res.certificate.gap))
        best = oracle.sampled_max_objective(oracle.detection_objective(c), n, 2, draws, [1300, i])["best_value"]
        worst_excess = max(worst_excess, best - res.kappa)
    for i in range(200):
        rng = np.random.default_rng([1301, i])
        n = 2 + i % 5
        m = 2 + (i // 5) % 4
        pats = [states.Amplitude(rng.normal(size=n) + 1j * rng.normal(size=n)) for _ in range(m)]
        w = rng.uniform(0.2, 1.0, size=m)
        res = identify.solve_identification(pats, weights=w / w.sum())
        worst_resid = max(worst_resid, res.certificate.max_residual, abs(res.certificate.gap))
        ops = [wk * np.outer(p.coeffs, p.coeffs.conj()) / w.sum() for wk, p in zip(w, pats)]
        best = oracle.sampled_max_objective(oracle.identification_objective(ops), n, m, draws,
                                            [1301, i])["best_value"]
        worst_excess = max(worst_excess, best - res.kappa)
    ok = worst_excess <= 1e-8 and worst_resid < 1e-8
    acceptance_log(13, ok, f"instances=400 max_oracle_excess={worst_excess:.2e} max_residual={worst_resid:.1e}")


def test_14_cli_determinism(acceptance_log, tmp_path):
    identical = True
    round_trip = 0.0
    names = sorted(p.stem for p in FIXTURES.glob("*.json"))
    for name in names:
        doc = json.loads((FIXTURES / f"{name}.json").read_text())
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run / f"{name}.json"
            code = cli.main([doc["kind"], str(FIXTURES / f"{name}.json"), "-o", str(out), "--seed", "7"])
            assert code == 0, name
            outs.append(out.read_bytes())
        identical &= outs[0] == outs[1]
        rep = json.loads(outs[0])
        if "measurement" not in rep:
            continue
        scn = tmp_path / f"{name}.validate.json"
        scn.write_text(json.dumps({"schema_version": 1, "kind": "validate",
                                   "inputs": {"measurement": rep["measurement"]}}))
        res = tmp_path / f"{name}.validate.report.json"
        assert cli.main(["validate", str(scn), "-o", str(res)]) == 0
        again = json.loads(res.read_text())["measurement_check"]
        for key, value in rep["measurement_check"].items():
            if isinstance(value, float):
                round_trip = max(round_trip, abs(again[key] - value))
            elif again[key] != value:
                round_trip = np.inf
    ok = identical and round_trip <= 1e-12
    acceptance_log(14, ok, f"fixtures={len(names)} byte_identical={identical} round_trip_max_diff={round_trip:.1e}")


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
