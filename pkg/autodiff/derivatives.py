"""
Forward-mode derivative operators.

Each call opens a fresh tag, seeds the inputs with one-hot (or directional)
partials, evaluates the function and reads back only the partials carrying
that tag. Inputs may already be dual scalars of older tags, which is how
the operators nest.
"""
import numpy as np

from core.conf import barrier_settings
from core.exceptions import DimensionMismatch, NonFiniteValue

from .dual import DualScalar, is_finite, next_tag, tighten
from .linalg import as_array
from .models import SmoothFn


def _split(out, tag, width):
    """Separate an output entry into its value and its partials for ``tag``."""
    if isinstance(out, DualScalar) and out.tag == tag:
        return out.value, out.partials
    return out, (0.0,) * width


def _evaluate(fn, x):
    out = fn(x)
    if not is_finite(out):
        raise NonFiniteValue('Function is not finite at this point.',
                             function=getattr(fn, 'label', repr(fn)))
    return out


def _check_input(fn, x):
    x = as_array(x)
    arity = getattr(fn, 'arity', x.shape[0])
    if x.shape != (arity,):
        raise DimensionMismatch(f'Expected an input of length {arity}, got shape {x.shape}.',
                                expected=arity, got=x.shape)
    return x


def linearize(fn, x, v):
    """Return ``(fn(x), Dfn(x) v)`` from a single dual evaluation."""
    x = _check_input(fn, x)
    v = as_array(v)
    if v.shape != x.shape:
        raise DimensionMismatch(f'Direction has shape {v.shape}, point has shape {x.shape}.',
                                expected=x.shape, got=v.shape)
    tag = next_tag()
    seeded = np.array([DualScalar(tag, xi, (vi,)) for xi, vi in zip(x, v)], dtype=object)
    out = _evaluate(fn, seeded)
    if isinstance(out, np.ndarray):
        values = np.empty(out.shape, dtype=object)
        slopes = np.empty(out.shape, dtype=object)
        for idx, entry in np.ndenumerate(out):
            values[idx], (slopes[idx],) = _split(entry, tag, 1)
        return tighten(values), tighten(slopes)
    value, (slope,) = _split(out, tag, 1)
    return value, slope


def directional_derivative(fn, x, v):
    return linearize(fn, x, v)[1]


def pushforward(fn, x, directions):
    """
    Return ``(fn(x), Dfn(x) V)`` for every column of ``V`` from one dual evaluation.

    The rates are shaped ``codomain + (k,)`` for ``k`` directions.
    """
    x = _check_input(fn, x)
    V = as_array(directions)
    if V.ndim != 2 or V.shape[0] != x.shape[0]:
        raise DimensionMismatch(f'Directions have shape {V.shape}, point has shape {x.shape}.',
                                expected=(x.shape[0], 'k'), got=V.shape)
    width = V.shape[1]
    tag = next_tag()
    seeded = np.empty(x.shape, dtype=object)
    for i, (xi, row) in enumerate(zip(x.tolist(), V.tolist())):
        seeded[i] = DualScalar(tag, xi, row)
    entries = np.asarray(_evaluate(fn, seeded), dtype=object)
    values = np.empty(entries.shape, dtype=object)
    rates = np.empty(entries.shape + (width,), dtype=object)
    for idx, entry in np.ndenumerate(entries):
        values[idx], partials = _split(entry, tag, width)
        for k, partial in enumerate(partials):
            rates[idx + (k,)] = partial
    if entries.ndim == 0:
        return values[()], tighten(rates)
    return tighten(values), tighten(rates)


def jacobian(fn, x, chunk_size=None):
    """
    Full first derivative, shaped ``codomain + (arity,)``.

    Inputs are seeded ``chunk_size`` directions at a time; the remaining
    inputs are passed through untouched.
    """
    x = _check_input(fn, x)
    n = x.shape[0]
    chunk_size = max(1, int(chunk_size or barrier_settings.AD_CHUNK_SIZE))
    columns = [None] * n
    for start in range(0, n, chunk_size):
        stop = min(n, start + chunk_size)
        width = stop - start
        tag = next_tag()
        seeded = np.array(list(x), dtype=object)
        for offset, i in enumerate(range(start, stop)):
            seeded[i] = DualScalar(tag, x[i], tuple(1.0 if k == offset else 0.0 for k in range(width)))
        out = _evaluate(fn, seeded)
        entries = np.asarray(out, dtype=object)
        for offset in range(width):
            col = np.empty(entries.shape, dtype=object)
            for idx, entry in np.ndenumerate(entries):
                col[idx] = _split(entry, tag, width)[1][offset]
            columns[start + offset] = col
    return tighten(np.stack(columns, axis=-1))


def gradient(fn, x, chunk_size=None):
    """Gradient of a scalar function as a 1-D array."""
    jac = jacobian(fn, x, chunk_size=chunk_size)
    if jac.ndim != 1:
        raise DimensionMismatch('Gradient needs a scalar valued function.', got=jac.shape[:-1])
    return jac


def hessian_vector(fn, x, v):
    """Hessian of a scalar function times ``v``, by differentiating the gradient along ``v``."""
    x = _check_input(fn, x)
    grad_fn = SmoothFn(x.shape[0], (x.shape[0],), lambda z: gradient(fn, z),
                       name=f'grad {getattr(fn, "label", "function")}')
    return directional_derivative(grad_fn, x, v)
