"""Bounded orbits of a two-matrix cocycle: words whose products stay small.

A rotation and a hyperbolic matrix over the full 2-shift.  Long runs of the
hyperbolic symbol blow up, so the bounded language loses entropy, and a
single forbidden word already proves an upper bound below log 2.

Run: python3 demos/bounded_words.py
"""
import math

import numpy as np

from cocyclebounds.cocycle import LocallyConstantCocycle, bounded_entropy_upper, bounded_words, rotation
from cocyclebounds.rigidity import forbidden_cylinder_upper, isometric_necessary
from cocyclebounds.sft import TransitionSystem

full = TransitionSystem.full_shift(2)
G0 = LocallyConstantCocycle.from_symbols(full, {1: rotation(2 * math.pi * 0.29), 2: np.diag([2.0, 0.5])},
                                         group="SL")

for kappa in (2, 4, 8):
    lang = bounded_words(G0, 12, kappa, "all-intervals")
    print(f"kappa={kappa}: {lang.count} of 4096 words of length 12 bounded, "
          f"entropy <= {bounded_entropy_upper(G0, kappa, 12):.4f}")

print("example bounded words at kappa 4:", bounded_words(G0, 8, 4).words[:4])

fc = forbidden_cylinder_upper(G0, 4, 8)
print(f"every orbit through {fc.word} has a {fc.N}-step product above kappa^2,")
print(f"so the bounded set has entropy <= {fc.bound:.6f} < log 2 = {math.log(2):.6f}")

print("isometric test:", isometric_necessary(G0, 4).summary())
