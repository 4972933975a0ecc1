"""Words, entropy and the entropy drop from forbidding one word.

Run: python3 demos/symbolic.py
"""
import math

from cocyclebounds.rigidity import lind_scaling_report, runs
from cocyclebounds.sft import (TransitionSystem, admissible_words, avoid_word_system,
                               higher_block, topological_entropy, word_count)

gm = TransitionSystem.golden_mean()
print("golden-mean shift, H =", gm.matrix.tolist())
for n in (1, 2, 5, 10):
    print(f"  words of length {n:2d}: {len(admissible_words(gm, n)):4d} (transfer matrix {word_count(gm, n)})")

h = topological_entropy(gm)
print(f"entropy {h:.12f}, log of the golden ratio {math.log((1 + 5 ** 0.5) / 2):.12f}")
for n in (2, 3, 4):
    print(f"  {n}-block presentation: entropy {topological_entropy(higher_block(gm, n).system()):.12f}")

# forbidding 1^n costs about rho^-n of entropy
rep = lind_scaling_report(gm, runs(1, range(6, 13)))
print("gap from forbidding 1^n, normalized by rho^n:")
for r in rep.rows:
    print(f"  n={r.n:2d}  gap={r.gap:.3e}  gap*rho^n={r.normalized:.4f}")
print(f"band ratio {rep.band_ratio:.3f}, decreasing {rep.decreasing}")

full = TransitionSystem.full_shift(2)
print("full 2-shift without '1,2,1':", avoid_word_system(full, (1, 2, 1)).entropy())
