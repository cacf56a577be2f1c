"""Numerical verification of the corrector norm scalings.

The layer profile phi = v0(tau) exp(sin(tau) eta / eps) on the outflow
half obeys sharp L^p rates: each eta-derivative costs 1/eps and each
L^p integration in eta pays eps^{1/p}, so

    | d^{s+m} phi / d eta^s d tau^m |_{L^p}  ~  eps^(1/p - s).

This script fits the observed log-log slopes on layer-adapted grids and
also shows that the (1/eps)-scaled exponential keeps finite mass.

Run:  python demos/05_norm_scalings.py
"""

from slpinn.analysis import lemma_norm_scaling, scaled_exponential_l1_mass
from slpinn.domains import DomainSpec

dom = DomainSpec.circle()
eps_list = [1e-2, 1e-3, 1e-4, 1e-5]

cases = [
    ("tau-derivative, L2 (expect +1/2)", dict(l=0, n=0, s=0, m=1, p_norm=2), 0.5),
    ("eta-derivative, L2 (expect -1/2)", dict(l=0, n=0, s=1, m=0, p_norm=2), -0.5),
    ("value, L1 (expect +1)", dict(l=0, n=0, s=0, m=0, p_norm=1), 1.0),
    ("(eta/eps)-weighted value, L2 (expect +1/2)", dict(l=0, n=1, s=0, m=0, p_norm=2), 0.5),
]
for label, kw, expect in cases:
    out = lemma_norm_scaling(dom, eps_list, **kw)
    print(f"{label}: slope {out['slope']:+.3f} (fit residual {out['residual']:.1e})")

print("\n(1/eps) exp(sin(tau) eta / eps) over the layer half, L1 mass:")
masses = scaled_exponential_l1_mass(dom, [1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
for e, m in masses.items():
    print(f"  eps = {e:7.0e}:  {m:8.3f}")
vals = list(masses.values())
print(f"max/min over five decades: {max(vals)/min(vals):.2f}  (< 2)")
