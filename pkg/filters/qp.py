import logging

import numpy as np

from core.conf import barrier_settings
from core.exceptions import InfeasibleAtState

from .models import FilterDecision

logger = logging.getLogger(__name__)


def qp_filter(cbf, x, u_desired, alpha=None, drift=None, actuation=None) -> FilterDecision:
    """
    Minimise ``|u - u_desired|^2 / 2`` subject to ``L_f h + L_g h u >= -alpha(h)``.

    A single halfspace constraint has the closed form minimiser
    ``u_desired - min(0, slack) L_g h^T / |L_g h|^2``. ``drift`` and
    ``actuation`` are ``f(x)`` and ``g(x)`` when the caller has them.
    """
    alpha = alpha or cbf.alpha
    x = np.asarray(x, dtype=float)
    u_desired = np.atleast_1d(np.asarray(u_desired, dtype=float))
    h, lf, lg = cbf.lie_derivatives(x, drift=drift, actuation=actuation)
    a = alpha(h)
    norm_sq = float(lg @ lg)
    slack = float(lf + lg @ u_desired + a)
    if np.sqrt(norm_sq) <= barrier_settings.LG_NORM_FLOOR:
        if lf + a < 0:
            raise InfeasibleAtState(
                f'L_g h vanishes and L_f h + alpha(h) = {lf + a:.3e} < 0.',
                state=x.tolist(), h=float(h), lf=float(lf))
        return FilterDecision(u_desired, u_desired, slack, False, float(h))
    if slack >= 0:
        return FilterDecision(u_desired, u_desired, slack, False, float(h))
    u_safe = u_desired - slack * lg / norm_sq
    logger.debug('Filter active at h=%.3e, correction %.3e.', h, -slack / np.sqrt(norm_sq))
    return FilterDecision(u_desired, u_safe, float(lf + lg @ u_safe + a), True, float(h))
