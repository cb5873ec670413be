"""Reference implementation of a linear destination-passing calculus.

Parser, desugarer, graded-modal typechecker, deterministic small-step
machine, and a metatheory harness that validates preservation, progress,
determinism and hole/destination balance along execution traces.
"""

__version__ = "0.1.0"
