"""Detection of a pure pair, identification of three patterns, and the trine qubit.

Run with ``python3 demos/detection_and_identification.py``.
"""

import numpy as np

from waverec import bloch, detect, identify, oracle, states

# Two equiprobable pure states with overlap 0.6.
p0, p1 = np.array([1.0, 0.0]), np.array([0.6, 0.8])
c = 0.5 * np.outer(p1, p1) - 0.5 * np.outer(p0, p0)
det = detect.optimal_detect(c)
print(f"pair: best detection quasifilter gains {det.kappa:.6f}; total {det.kappa + 0.5:.6f}")
print(f"      certificate residual {det.certificate.max_residual:.1e}, gap {det.certificate.gap:.1e}")

# Three equiangular patterns: closed form, square-root measurement and the general solver.
for gamma in (0.0, 0.5, 0.9):
    closed = identify.equiangular_closed_form(3, 1.0, gamma)
    general = identify.solve_identification(identify.equiangular_amplitudes(3, 1.0, gamma)).kappa
    print(f"equiangular gamma={gamma:.1f}: closed {closed:.6f}  solver {general:.6f}")

# Random patterns against random measurements drawn by the oracle.
rng = np.random.default_rng(1)
pats = [states.Amplitude(rng.normal(size=4) + 1j * rng.normal(size=4)) for _ in range(3)]
res = identify.solve_identification(pats)
ops = [np.outer(p.coeffs, p.coeffs.conj()) for p in pats]
best = oracle.sampled_max_objective(oracle.identification_objective(ops), 4, 3, 2000, 0)["best_value"]
print(f"random patterns: optimum {res.kappa:.6f}; best of 2000 random POVMs {best:.6f}")

# Trine of qubit polarizations.
a = 2 * np.pi * np.arange(3) / 3
sol = bloch.solve_polarizations([bloch.BlochPoint(1 / 3, [np.cos(t) / 3, 0, np.sin(t) / 3]) for t in a])
print(f"trine: kappa {sol.kappa:.6f}, decision centre {np.round(sol.l, 12)}")
