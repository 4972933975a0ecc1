"""From the identity cocycle to a certified entropy sandwich.

1. perturb the identity over the golden-mean shift so that a family of
   words carries prescribed matrices (a covering family);
2. certify the covering and a two-layer multiple covering;
3. grow a binary tree of bounded words, giving gamma = log 2 / L;
4. twist unused windows so a short forbidden word bounds the entropy
   from above by gamma' < log of the golden ratio.

Every certificate is written to a directory and re-checked from the files.

Run: python3 demos/pipeline.py [outdir]   (about 30 s)
"""
import sys
import tempfile

import numpy as np

from cocyclebounds.cocycle import LocallyConstantCocycle
from cocyclebounds.io import reverify_pipeline
from cocyclebounds.perturb import theorem_a_pipeline
from cocyclebounds.sft import TransitionSystem

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="pipeline-")
A = LocallyConstantCocycle.constant(TransitionSystem.golden_mean(), np.eye(2), group="SL")
rep = theorem_a_pipeline(A, 0.25, depth=8, horizon=12, out=out)
print(rep.text())
k = rep.constants
print(f"0 < gamma = {k['gamma']:.3e} <= gamma' = {k['gamma_upper']:.6f} < h_top = {k['h_top']:.6f}")
print(f"C0 distance to the identity: {k['d_C0']:.4f} (< 0.25)")
print("re-verified from", out, ":", reverify_pipeline(out))
