"""Output quadrature spectra and the spectral EPR products at one operating point."""
import numpy as np

from ndopo_steer import SystemParams, drift_diffusion, solve_steady_state, spectrum_at
from ndopo_steer.steering import epr_product

p = SystemParams(gamma=(1.0, 0.5, 1.0), kappa=0.01, eps0=100.0, eps1=50.0)
ss = solve_steady_state(p)
dd = drift_diffusion(p, ss)
print("eigenvalues of A:", np.round(np.sort_complex(dd.eigenvalues_A), 4))

print("\n omega   VX11    VX22    VX12  | EPR01   EPR10   EPR12   EPR21")
for w in (0.0, 0.5, 1.0, 2.0, 4.0, 6.0, 10.0):
    q = spectrum_at(p, dd.A, dd.D, w)
    eprs = [epr_product(q.VX, q.VY, j, k) for j, k in ((0, 1), (1, 0), (1, 2), (2, 1))]
    print(f"{w:5.1f} {q.VX[1, 1]:7.3f} {q.VX[2, 2]:7.3f} {q.VX[1, 2]:7.3f} | "
          + " ".join(f"{e:7.4f}" for e in eprs))

# far from the cavity linewidths only vacuum noise is left
q = spectrum_at(p, dd.A, dd.D, 1e3)
print("\nat omega = 1000, |VX - 1| =", f"{np.abs(q.VX - np.eye(3)).max():.1e}")
