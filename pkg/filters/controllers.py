import numpy as np

from autodiff.dual import primal_array
from core.conf import barrier_settings
from core.exceptions import RankDeficientAtState
from lie.derivatives import lie_rates, output_coordinate_fn
from lie.verification import smallest_singular_value


class ExplicitController:
    """
    The smooth feedback that certifies a backstepped barrier.

    ``u = A^+ (k_gamma(zeta_gamma) - L_f^gamma y)`` with
    ``A = L_g L_f^{gamma-1} y``; ``k_gamma`` is the last step of the virtual
    controller recursion, so the top output derivative tracks it exactly.
    """

    def __init__(self, cbf):
        self.cbf = cbf
        sys, y = cbf.system, cbf.output
        self.rates = lie_rates(sys, y, y.gamma - 1)
        self.coordinates = output_coordinate_fn(sys, y)

    def split_rates(self, x):
        """``(L_f^gamma y, A)`` at ``x`` as floats."""
        rates = primal_array(self.rates(x))
        return rates[:, 0], rates[:, 1:]

    def decoupling_matrix(self, x) -> np.ndarray:
        return self.split_rates(x)[1]

    def __call__(self, x, rates=None) -> np.ndarray:
        """Feedback at ``x``; ``rates`` reuses a ``split_rates(x)`` already taken."""
        x = np.asarray(x, dtype=float)
        drift, A = self.split_rates(x) if rates is None else rates
        sigma_min = smallest_singular_value(A, self.cbf.output.p)
        if sigma_min < barrier_settings.PSEUDO_INVERSE_CUTOFF:
            raise RankDeficientAtState(
                f'Decoupling matrix has sigma_min {sigma_min:.3e} at this state.',
                state=x.tolist(), min_singular_value=sigma_min)
        rhs = primal_array(self.cbf.target(self.coordinates(x))) - drift
        return np.linalg.pinv(A) @ rhs


def universal_controller(cbf, x) -> np.ndarray:
    return ExplicitController(cbf)(x)
