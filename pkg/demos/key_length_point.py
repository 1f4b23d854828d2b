"""Key length at one channel point, with and without advantage distillation.

Run: python demos/key_length_point.py [misalignment_degrees]
"""

import sys

from adqkd import ChannelParams, ProtocolParams, secure_key_length

deg = float(sys.argv[1]) if len(sys.argv) > 1 else 10.0
ch = ChannelParams.from_degrees(eta=1.0, p_noise=0.0, delta_mis_deg=deg)

bb = secure_key_length(ProtocolParams(N=1e8, q_t=0.0), ch, variant="bb84")
print(f"misalignment {deg:.1f} deg, key-set error rate {bb.diagnostics['phi_K']:.4f}")
print(f"  BB84          ell = {bb.ell:>10d}  rate = {bb.rate:.3e}")
for b in range(1, 6):
    res = secure_key_length(ProtocolParams(N=1e8, b=b), ch, variant="ad")
    ad = res.diagnostics["ad"]
    extra = f"S_Kbar- = {ad.S_K_bar_minus:.4g}  Phi_Xbar+ = {ad.Phi_X_bar_plus:.4f}" if res.valid \
        else f"invalid: {ad.failed}"
    print(f"  AD b={b}        ell = {res.ell:>10d}  rate = {res.rate:.3e}  {extra}")
