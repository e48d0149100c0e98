"""
Recovering a metric from three 2-forms
======================================

Pull the flat hyperkahler triple back along a random linear map and read the
metric and the three complex structures off the forms alone.
"""

import numpy as np

from hklab import FormTriple, metric_from_triple, random_pullback
from hklab.exterior import FLAT_TRIPLE, pullback_matrix

rng = np.random.Generator(np.random.Philox(0))
L = random_pullback(rng)
triple = FormTriple(FLAT_TRIPLE @ pullback_matrix(L).T, np.linalg.det(L))

q = metric_from_triple(triple)
print("recovered g:\n", np.round(q.g, 6))
print("max |g - L^T L| =", np.abs(q.g - L.T @ L).max())

# the complex structures satisfy the quaternion relations
print("max |I^2 + 1| =", np.abs(q.I @ q.I + np.eye(4)).max())
print("max |IJ - K|  =", np.abs(q.I @ q.J - q.K).max())

# the Gram matrix of the triple is the identity times the volume form
print("quaternion defect:", q.quaternion_defect())
