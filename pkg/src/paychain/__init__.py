"""paychain: tamper-evident payment approval with explainable fraud scoring.

A desk-scale reproduction of a blockchain-anchored fraud detection
architecture: an append-only hash-chained ledger with Merkle inclusion
proofs and quorum commit, a seven-state payment approval contract that
refuses to act without recorded model assessments, a from-scratch
gradient-boosted detector with exact Shapley explanations, gas/USD cost
modeling, and an attack/audit harness that shows why mutable logs fail
where ledger-anchored trails do not.
"""

__version__ = "0.1.0"
