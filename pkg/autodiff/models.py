from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from core.exceptions import DimensionMismatch, NonFiniteValue

from .dual import is_finite
from .linalg import as_array


@dataclass(frozen=True)
class SmoothFn:
    """
    A smooth map ``R^arity -> R^codomain`` written against generic scalars.

    ``codomain`` is the output shape: ``()`` for scalars, ``(p,)`` for
    vectors, ``(n, m)`` for matrix valued fields. The evaluator receives a
    1-D array (float or object dtype) and must only use arithmetic and the
    functions in ``autodiff.elementary`` so it can be differentiated.
    """
    arity: int
    codomain: tuple
    evaluator: Callable = field(repr=False, compare=False)
    name: str = ''

    def __call__(self, x):
        x = as_array(x)
        if x.shape != (self.arity,):
            raise DimensionMismatch(
                f'{self.label} expects an input of length {self.arity}, got shape {x.shape}.',
                expected=self.arity, got=x.shape)
        out = self.evaluator(x)
        if self.codomain == ():
            if isinstance(out, np.ndarray) and out.shape in ((), (1,)):
                out = out.reshape(()).item() if out.dtype == object else float(out.reshape(()))
            elif isinstance(out, np.ndarray):
                raise DimensionMismatch(
                    f'{self.label} returned shape {out.shape}, expected a scalar.',
                    expected=(), got=out.shape)
            finite = is_finite(out)
        else:
            out = as_array(out)
            if out.shape != self.codomain:
                raise DimensionMismatch(
                    f'{self.label} returned shape {out.shape}, expected {self.codomain}.',
                    expected=self.codomain, got=out.shape)
            finite = is_finite(out)
        if not finite:
            raise NonFiniteValue(f'{self.label} is not finite at this point.', function=self.label)
        return out

    @property
    def label(self) -> str:
        return self.name or 'function'

    @property
    def is_scalar(self) -> bool:
        return self.codomain == ()

    def compose(self, inner: 'SmoothFn', name: str = '') -> 'SmoothFn':
        """Return ``self ∘ inner``."""
        if inner.codomain != (self.arity,):
            raise DimensionMismatch(
                f'Cannot compose {self.label} after {inner.label}.',
                expected=(self.arity,), got=inner.codomain)
        return SmoothFn(inner.arity, self.codomain, lambda x: self(inner(x)),
                        name=name or f'{self.label}∘{inner.label}')
