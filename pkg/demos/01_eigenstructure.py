"""
==========================
Eigenstructure of a channel
==========================

The linearized channel carries three waves: two water waves and a slow
bed wave.  Exactly one of them travels upstream: a water wave when the
flow is subcritical, the bed wave when it is supercritical.
"""
import numpy as np

from sve_backstepping import SVEError, EquilibriumSetup, PhysicalParams, char_coefficients, froude, spectrum
from sve_backstepping.characteristics import characteristic_polynomial

channels = {
    "deep, slow (H*=2, V*=3)": EquilibriumSetup(PhysicalParams(Ag=0.008), 2.0, 3.0, 0.4, 1.5, 1.5, 1.0, 1.2),
    "shallow, fast (H*=1, V*=5)": EquilibriumSetup(PhysicalParams(Ag=0.003), 1.0, 5.0, 0.4, 1.0, 1.5, 1.0, 1.2),
}

for name, s in channels.items():
    sp = spectrum(s)
    cc = char_coefficients(s, sp)
    print(name)
    print("  Fr      =", round(float(froude(s.Hstar, s.Vstar)), 4), sp.regime.value)
    print("  lambda  =", np.round(sp.lam, 4))
    print("  sum     =", round(float(sp.lam.sum()), 12), " (2 V* =", 2 * s.Vstar, ")")
    print("  speeds  mu=%.4f gamma1=%.4f gamma2=%.4f" % (cc.mu, cc.gamma1, cc.gamma2))
    print("  alpha1=%.4g  eta=(%.4g, %.4g)" % (cc.alpha1, cc.eta1, cc.eta2))

# Water waves sit near V* -+ sqrt(g H*); the bed wave is slow.  Without
# sediment (a -> 0) the bed wave stops, which is why a = 0 is rejected.
print()
print("sweep over V* at H* = 1.5:")
for V in (1.0, 2.0, 3.0, 3.7, 4.0, 5.0, 6.0):
    s = EquilibriumSetup(PhysicalParams(Ag=0.005), 1.5, V)
    try:
        sp = spectrum(s)
        lam = np.sort(sp.lam)
        print(f"  V*={V:3.1f}  Fr={froude(1.5, V):.3f}  {sp.regime.value:13s}  lambda={np.round(lam, 3)}")
    except SVEError as exc:
        print(f"  V*={V:3.1f}  {type(exc).__name__}: {exc}")

# Polynomial coefficients for the record
print()
print("cubic coefficients (deep channel):", characteristic_polynomial(channels["deep, slow (H*=2, V*=3)"]))
