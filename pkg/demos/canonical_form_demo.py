"""Canonical forms of coupling matrices and the pivots the time formulas use."""

import numpy as np

from hypctrl import canonical_form, reversed_coupling

for q in (np.eye(2),
          np.array([[0.0, 1.0], [1.0, 0.0]]),
          np.array([[2.0, 3.0], [4.0, 5.0]]),
          np.array([[1.0, 2.0, 0.5], [2.0, 4.0, 1.0]])):   # rank deficient
    dec = canonical_form(q)
    print("Q =")
    print(q)
    print("canonical form =")
    print(dec.canonical)
    print(f"rank {dec.rank}, pivots {dec.pivots}")
    defect = np.max(np.abs(dec.lower @ q @ dec.upper - dec.canonical))
    print(f"|L Q U - canonical| = {float(defect):.2e}")
    print()

q1 = np.array([[1.0, 2.0], [3.0, 4.0]])
print("coupling at x=1 relabeled backwards:")
print(reversed_coupling(q1))
