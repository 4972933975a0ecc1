"""Covering certificates in SL(2, R).

The inverses of a net of B_0.3 cover B_0.2 in the sense that every point
of the closed ball is moved back into the open ball by some family member.
The certificate is a finite net plus a margin that beats the Lipschitz
error of each net cell.  Two disjoint sub-families give a multiple cover.

Run: python3 demos/covering.py   (about 20 s)
"""
import numpy as np

from cocyclebounds import _batch as B
from cocyclebounds.covering import (Region, build_net, multi_cover_from_cover, sample_multi_cover,
                                    verify_covering, verify_multi_cover)

U = Region.ball(0.2)
pool = build_net(Region.ball(0.3), 0.05)
family = B.inverses(pool.points)
cert = verify_covering(list(family), U, 0.05)
print(f"{len(family)} maps, {len(cert.points)} net points: {cert.status}, "
      f"min margin {cert.min_margin:.4f}, {len(cert.used())} maps used")

bad = verify_covering([np.eye(2)], U, 0.05)
print("the identity alone:", bad.status, "-", bad.message)

used = [family[i] for i in cert.used()]
mc = multi_cover_from_cover(used, U, 2, 0.05)
print(f"multiple cover: m={mc.m}, R0={mc.R0:.4f}, delta={mc.delta:.2e}, "
      f"R0 - m delta = {mc.R0 - mc.m * mc.delta:.4f}")
print("verified:", bool(verify_multi_cover(None, mc)))
rep = sample_multi_cover(mc, 500, seed=1)
print(f"500 random points all find witnesses: {rep.ok} (min margin {rep.min_margin:.3f})")
