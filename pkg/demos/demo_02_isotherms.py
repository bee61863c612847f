"""Compare the three adsorption laws and their calculus.

Each law exposes q, its derivatives, and the two antiderivatives used by the
mass ledger: Q(c) = int_0^c q and A(c) = int_0^c s q'(s) ds.  The saturating
law levels off at q_max, which is what produces breakthrough behavior in a
loaded column.
"""

import numpy as np

from chromfem.isotherm import Affine, Constant, Langmuir

laws = {
    "constant K=0.5": Constant(0.5),
    "affine 0.2+0.8c": Affine(0.2, 0.8),
    "saturating q_max=1, K_eq=1": Langmuir(1.0, 1.0),
}

cs = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 20.0])
for name, law in laws.items():
    s = law.sample(cs)
    print(f"\n{name}")
    print("  c   " + "".join(f"{c:>9.2f}" for c in cs))
    print("  q   " + "".join(f"{v:>9.4f}" for v in s.q))
    print("  q'  " + "".join(f"{v:>9.4f}" for v in s.dq))
    print("  Q   " + "".join(f"{v:>9.4f}" for v in s.Q))
    print("  A   " + "".join(f"{v:>9.4f}" for v in s.A))

# the closed forms agree with numerical quadrature
from scipy.integrate import quad

law = Langmuir(1.0, 1.0)
Q_ref, _ = quad(lambda t: float(law.sample(t).q), 0.0, 1.0)
print(f"\nsaturating law at c=1: Q = {float(law.sample(1.0).Q):.12f}, "
      f"quadrature {Q_ref:.12f}")
print(f"A(1) = {float(law.sample(1.0).A):.12f} = ln 2 - 1/2 = {np.log(2) - 0.5:.12f}")
