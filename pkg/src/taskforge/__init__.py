"""Evolutionary synthesis of executable code-reasoning tasks.

Discovers, mutates, crosses over, verifies, and persists deduction,
abduction, and induction tasks over a dual-axis space of algorithmic skills
and complexity attributes, gated by an executability / skill-alignment /
learnability fitness check.
"""

__version__ = "0.1.0"
