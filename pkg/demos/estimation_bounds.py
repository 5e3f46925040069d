"""Estimation bounds and Bayesian estimation of a field amplitude.

Run with ``python3 demos/estimation_bounds.py``.
"""

import numpy as np

from waverec import estimate, measure

fam = estimate.rotation_qubit(0.8)
print(f"rotated qubit, Bloch radius 0.8: SLD information {estimate.sld_bound(fam, [0.3]).info[0, 0]:.6f}")

for nbar in (0.0, 1.0, 2.0):
    h = estimate.rld_bound(estimate.thermal_coherent(nbar, 64), [0.4 + 0.2j]).info[0, 0].real
    print(f"displaced thermal state nbar={nbar}: right information {h:.6f} (1/(nbar+1) = {1 / (nbar + 1):.6f})")

m = measure.coherent_povm(32, 8.0, 161)
r, bias = estimate.measurement_covariance(m, lambda a: a, estimate.coherent_family(32)([0.5 + 0.3j]), [0.5 + 0.3j])
print(f"coherent measurement of a coherent state: variance {r[0, 0].real:.5f}, bias {abs(bias[0]):.1e}")

res = estimate.gaussian_amplitude_bayes(1.0, 2.0, fock_dim=80)
cf = estimate.gaussian_amplitude_closed_form(1.0, 2.0)
print(f"real amplitude, nbar=1, prior variance 2: numeric {res.sigma2:.8f}, quadrature formula {cf['sigma2']:.8f}")

moments = estimate.complex_moment_operators(1.0, 3.0, 64)
num = estimate.heterodyne_numeric(1.0, 3.0, measure.coherent_povm(64, 12.0, 160), moments=moments)
print(f"complex amplitude, nbar=1, prior variance 3: closed form "
      f"{estimate.heterodyne_closed_form(1.0, 3.0)['sigma2']:.6f}, coherent-measurement quadrature {num:.6f}")
