"""Dense linear algebra that works on object arrays of dual scalars."""
import numpy as np

from core.exceptions import DimensionMismatch

from .dual import primal, tighten


def as_array(values) -> np.ndarray:
    """Stack values into an ndarray, letting numpy pick float or object dtype."""
    if isinstance(values, np.ndarray):
        return values
    return np.array(values)


def solve(A, b) -> np.ndarray:
    """
    Solve ``A x = b``.

    Plain float systems go straight to LAPACK. Object arrays of dual scalars
    are eliminated with partial pivoting on primal magnitudes.
    """
    A, b = as_array(A), as_array(b)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n or b.shape[0] != n:
        raise DimensionMismatch(f'Cannot solve a {A.shape} system against {b.shape}.',
                                a_shape=A.shape, b_shape=b.shape)
    if A.dtype != object and b.dtype != object:
        return np.linalg.solve(A.astype(float), b.astype(float))
    A = np.array(A, dtype=object)
    b = np.array(b, dtype=object)
    vector = b.ndim == 1
    if vector:
        b = b.reshape(n, 1)

    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(primal(A[r, col])))
        if primal(A[pivot, col]) == 0:
            raise np.linalg.LinAlgError('Singular matrix')
        if pivot != col:
            A[[col, pivot]] = A[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            factor = A[row, col] / A[col, col]
            A[row, col:] = A[row, col:] - factor * A[col, col:]
            b[row] = b[row] - factor * b[col]

    x = np.empty_like(b)
    for row in range(n - 1, -1, -1):
        acc = b[row]
        for k in range(row + 1, n):
            acc = acc - A[row, k] * x[k]
        x[row] = acc / A[row, row]

    x = tighten(x)
    return x[:, 0] if vector else x
