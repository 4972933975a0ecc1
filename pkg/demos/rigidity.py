"""A bounded cocycle that is not isometric.

The unipotent example built from a_k = cos(log(k+1)) has bounded products
along every orbit, yet two peak subsequences of a give return values that
no orthogonal conjugacy can reconcile.

Run: python3 demos/rigidity.py
"""
import numpy as np

from cocyclebounds.rigidity import example_cocycle, nonconjugacy_witness, peak_subsequences, x_k

X = example_cocycle(3, D=12)
print("block words v, w:", X.v, X.w)
for k in (1, 5, 20):
    P = X.iterate(x_k(k), k * X.ell, exact=True)
    print(f"A_{k * X.ell}(x^({k})) =", np.round(P, 6).tolist(), f" a_{k} = {X.a(k):.6f}")

rng = np.random.default_rng(0)
C = X.remainder_factor()
worst = max(X.iterate_norms(X.sample_point(rng, 300), 900).max() for _ in range(10))
print(f"largest ||A_n|| over 10 random points, n <= 900: {worst:.4f} <= (1+sqrt 2) C = {(1 + 2 ** .5) * C:.4f}")

ks1, ks2 = peak_subsequences()
w = nonconjugacy_witness(3, X.a, ks1, ks2)
print(f"limits beta={w.beta:.4f}, beta'={w.beta2:.4f}: conjugator trace {w.trace}, "
      f"distance from orthogonal {w.orth_defect:.4f}, conclusive {w.conclusive}")
