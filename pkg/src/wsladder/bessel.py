"""Bessel functions of the first kind at integer order."""
from __future__ import annotations

import math
from decimal import Decimal, localcontext
from functools import lru_cache

from .errors import InvalidArgument

MAX_ORDER = 200
MAX_ARG = 100.0
SERIES_LIMIT = 12.0


def _series(n: int, x: float) -> float:
    # Alternating series; extended precision absorbs the cancellation near |x| = 12.
    with localcontext() as ctx:
        ctx.prec = 50
        hx = Decimal(x) / 2
        q = -(hx * hx)
        term = Decimal(1)
        for k in range(1, n + 1):
            term = term * hx / k
        total = term
        k = 0
        eps = Decimal(10) ** -40
        while True:
            k += 1
            term = term * q / (k * (n + k))
            total += term
            if abs(term) < eps * (abs(total) + eps) and k > hx:
                break
        return float(total)


@lru_cache(maxsize=256)
def _miller(x: float) -> tuple[float, ...]:
    """J_0 .. J_MAX_ORDER at x by downward recurrence, normalized with J_0 + 2 sum J_2k = 1."""
    start = 2 * ((max(MAX_ORDER, int(abs(x))) + 40 + int(math.sqrt(40 * abs(x)))) // 2)
    vals = [0.0] * (start + 2)
    vals[start] = 1e-300
    for k in range(start, 0, -1):
        vals[k - 1] = 2.0 * k / x * vals[k] - vals[k + 1]
        if abs(vals[k - 1]) > 1e250:
            vals[k - 1:] = [v * 1e-250 for v in vals[k - 1:]]
    norm = vals[0] + 2.0 * math.fsum(vals[2:start + 1:2])
    return tuple(v / norm for v in vals[:MAX_ORDER + 1])


def bessel_j(order: int, x: float) -> float:
    """``J_order(x)`` to 1e-12 absolute for ``|order| <= 200`` and ``|x| <= 100``."""
    if int(order) != order:
        raise InvalidArgument(f"integer order required, got {order}")
    order = int(order)
    x = float(x)
    if abs(order) > MAX_ORDER or not (abs(x) <= MAX_ARG):
        raise InvalidArgument(
            f"J_{order}({x}) outside the supported range |n| <= {MAX_ORDER}, |x| <= {MAX_ARG:g}")
    n = abs(order)
    sign = -1.0 if (order < 0 and n % 2) else 1.0
    if x < 0:
        x = -x
        if n % 2:
            sign = -sign
    if x == 0.0:
        return sign * (1.0 if n == 0 else 0.0)
    if x <= SERIES_LIMIT:
        return sign * _series(n, x)
    return sign * _miller(x)[n]
