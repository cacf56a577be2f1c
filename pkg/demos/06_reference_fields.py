"""The reference fields each benchmark is scored against.

* channel: a separable closed form (the profile solves a constant-
  coefficient two-point problem exactly),
* time-dependent disk: a designed polynomial/root solution whose forcing
  we compute by applying the operator symbolically,
* compatible/incompatible disk and the ellipses: the asymptotic field
  u0 + corrector, accurate to O(sqrt(eps)),
* compatibility of the forcing decides whether the corrector amplitude
  stays bounded at the characteristic points (+-x_char, 0).

Run:  python demos/06_reference_fields.py
"""

import numpy as np

from slpinn.domains import DomainSpec
from slpinn.reference import (channel_exact, channel_profile, compatibility_check,
                              limit_solution, make_forcing, time_circle_exact)

eps = 1e-6
print("channel closed form, f = sin(2 pi x):")
print(f"  u(0.25, 0.5)  = {float(channel_exact(eps, 0.25, 0.5)):.8f}   "
      f"(limit value 0.5)")
g, g1, g2 = channel_profile(eps, np.array([0.0, 0.5, 1.0]))
print(f"  profile at y = 0, 1/2, 1: {g.round(10)}")
resid = -eps * (g2 - 4 * np.pi**2 * g) - g1 - 1.0
print(f"  equation residual of the closed form: {np.abs(resid).max():.2e}\n")

print("time-dependent disk, designed solution:")
print(f"  u(t=1, 0, 0)     = {float(time_circle_exact(eps, 1.0, 0.0, 0.0)):.8f}"
      f"   (= 1 + eps)")
print(f"  u(t=0, anywhere) = {float(time_circle_exact(eps, 0.0, 0.3, 0.2)):.1f}\n")

dom = DomainSpec.circle()
quartic = make_forcing("compatible_quartic").fn
print("limit solution by adaptive quadrature, f = (1-x^2)^2:")
print(f"  u0(0, 0) = {limit_solution(dom, quartic, [0.0], [0.0])[0]:.10f}   (= 1)\n")

print("compatibility at the characteristic points (+-1, 0):")
for name in ("compatible_quartic", "one"):
    rep = compatibility_check(make_forcing(name).fn, dom)
    verdict = "compatible" if rep.compatible else "incompatible"
    print(f"  f = {name:20s} -> {verdict}")
print("an incompatible forcing leaves f(+-1,0) != 0, so derivatives of the")
print("limit solution blow up there; the enriched scheme still trains fine")
