"""
Fusing evidential outputs by hand
=================================

Two branches report NIG parameters for one sample. Summing them gives
the fused belief, its uncertainties and the Student-t predictive.
"""

import numpy as np

from monig import NIGParams, aleatoric, epistemic, monig_fuse, nig_sum
from monig.nig import marginal_student_t

# a confident branch and a vague one that disagrees with it
sharp = NIGParams(delta=2.0, gamma=8.0, alpha=6.0, beta=2.0)
vague = NIGParams(delta=5.0, gamma=0.5, alpha=1.5, beta=3.0)

fused = nig_sum(sharp, vague)
print("fused:", fused)
# the mean is pulled toward the branch with more virtual observations
print("prediction %.3f" % fused.delta)

for name, p in [("sharp", sharp), ("vague", vague), ("fused", fused)]:
    print(f"{name:6s} AU {aleatoric(p):.3f}  EU {epistemic(p):.3f}")

# disagreement between branches shows up in beta
print("beta grows by", fused.beta - sharp.beta - vague.beta)

t = marginal_student_t(fused)
print("student-t: loc %.3f  scale^2 %.3f  dof %.1f" % (t.location, t.scale, t.dof))

# order does not matter, and arrays fuse row by row
rng = np.random.default_rng(0)
branches = [NIGParams(rng.normal(size=4), rng.uniform(0.5, 3, 4), rng.uniform(1.5, 4, 4), rng.uniform(0.5, 2, 4)) for _ in range(3)]
a = monig_fuse(branches)
b = monig_fuse(branches[::-1])
print("max field gap after reordering:", max(float(np.max(np.abs(x - y))) for x, y in zip(a, b)))
