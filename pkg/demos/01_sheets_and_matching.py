"""Unordered Q-tuples, the matching distance, and sheet tracking.

Walk through the basic objects: build points of A_Q(R^2), measure them with
the optimal-matching distance, split off averages, and track the two
branches of w^2 = z^3 around the origin to watch them swap.
"""

import numpy as np

import qbranch as qb

print("-- matching distance ------------------------------------------")
a = qb.QPoint([[0.0, 0.0], [1.0, 0.0]])
b = qb.QPoint([[0.0, 1.0], [1.0, 1.0]])
print("straight pairing wins:", qb.metric_g(a, b), "= sqrt(2)")
print("crossed pairing would cost",
      np.sqrt(np.sum((a.vectors - b.vectors[::-1]) ** 2)))

shuffled = qb.QPoint(b.vectors[::-1])
print("order is an artifact, distance to shuffled copy:",
      qb.metric_g(b, shuffled))

print()
print("-- averages ---------------------------------------------------")
pt = qb.QPoint([[2.0, 1.0], [0.0, -1.0], [1.0, 3.0]])
print("eta:", qb.eta(pt))
free = qb.average_free(pt)
print("average-free part has eta:", qb.eta(free))

print()
print("-- tracking around a branch point -----------------------------")
spec = qb.CurveSpec(2, 3)
thetas = np.linspace(0, 2 * np.pi, 256, endpoint=False)
loop = [qb.evaluate_sheets(spec, 0.5 * np.exp(1j * t)) for t in thetas]
sel = qb.track_selection(loop, closed=True)
print("monodromy of w^2 = z^3 around 0:", sel.monodromy,
      "(the sheets swap)")
print("cycle structure:", sel.monodromy_cycle_lengths())

constant = [qb.QPoint([[1.0, 0.0], [-1.0, 0.0]])] * 64
print("constant chain monodromy:",
      qb.track_selection(constant, closed=True).monodromy)

print()
print("-- refusing ambiguity -----------------------------------------")
try:
    near = qb.QPoint([[1e-10, 0.0], [-1e-10, 0.0]])
    qb.track_selection([loop[0], near, loop[0]])
except qb.TrackingError as err:
    print("tracking refused at sample", err.sample_index, "->", err)
