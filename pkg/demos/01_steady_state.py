"""Mean fields of the injected oscillator, two ways.

The direct solver relaxes the noise-free equations and polishes with Newton;
the quintic in alpha_0 gives every real steady state independently.
"""
import numpy as np

from ndopo_steer import SystemParams, solve_steady_state, steady_state_oracle
from ndopo_steer.steady_state import select_physical

p = SystemParams(gamma=(1.0, 0.5, 1.0), kappa=0.01, eps0=100.0, eps1=50.0)
print(f"pump threshold without injection: {p.threshold:.2f} (pump is {p.eps0:g})")

ss = solve_steady_state(p)
print("solver:", np.round(ss.alpha, 6), "residual", f"{ss.residual:.1e}", "stable", ss.stable)

# every real root of the quintic, stable or not
for s in steady_state_oracle(p):
    print("  quintic root:", np.round(np.real(s.alpha), 6), "stable" if s.stable else "unstable")
best = select_physical(p, steady_state_oracle(p), previous=ss.alpha)
print("relative gap to oracle:", np.max(np.abs(np.subtract(ss.alpha, best.alpha)) / np.abs(best.alpha)))

# without injection the pump sits above threshold: alpha_1 = alpha_2 = 0 is a
# fixed point but not a stable one
zero = solve_steady_state(p.with_ratio(0.0))
print("\nno injection:", np.round(np.real(zero.alpha), 6), "stable", zero.stable)

# continuation along the injection ratio, seeding each point with the last
print("\n ratio   alpha0     alpha1     alpha2")
prev = None
for r in np.arange(0.1, 2.01, 0.2):
    s = solve_steady_state(p.with_ratio(r), seed=prev)
    prev = s.alpha
    print(f"{r:5.2f} " + " ".join(f"{a.real:10.4f}" for a in s.alpha))
