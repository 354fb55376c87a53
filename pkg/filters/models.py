from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FilterDecision:
    """One safety filter evaluation; ``u_safe is u_desired`` whenever ``active`` is false."""
    u_desired: np.ndarray
    u_safe: np.ndarray
    constraint_value: float
    active: bool
    h: float = 0.0
