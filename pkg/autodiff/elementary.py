"""
Elementary functions that accept plain reals and dual scalars alike.

Model code is written once against these (``sin(theta)``, ``sqrt(r)``) and is
then differentiable to any nesting depth. Plain reals go straight to ``math``
so undifferentiated evaluation is untouched.
"""
import math
from numbers import Real


def sin(x):
    if isinstance(x, Real):
        return math.sin(x)
    return x.sin()


def cos(x):
    if isinstance(x, Real):
        return math.cos(x)
    return x.cos()


def tan(x):
    if isinstance(x, Real):
        return math.tan(x)
    return x.tan()


def exp(x):
    if isinstance(x, Real):
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    return x.exp()


def log(x):
    if isinstance(x, Real):
        if x > 0:
            return math.log(x)
        return -math.inf if x == 0 else math.nan
    return x.log()


def sqrt(x):
    if isinstance(x, Real):
        return math.sqrt(x) if x >= 0 else math.nan
    return x.sqrt()


def arctan(x):
    if isinstance(x, Real):
        return math.atan(x)
    return x.arctan()


def tanh(x):
    if isinstance(x, Real):
        return math.tanh(x)
    return x.tanh()
