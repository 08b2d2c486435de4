"""Finite eps-graded series truncated at a fixed order."""

from __future__ import annotations

import operator
from typing import Callable, Generic, Iterable, TypeVar

T = TypeVar("T")


class TruncationError(IndexError):
    """Access or arithmetic beyond the truncation order."""


class EpsSeries(Generic[T]):
    """``sum_{k=0}^{E} eps^k c_k`` with payloads supporting ``+``, ``-`` and ``scale``.

    ``zero`` is the additive identity of the payload type; missing orders
    read as zero.
    """

    __slots__ = ("coeffs", "order", "zero")

    def __init__(self, coeffs: dict[int, T] | Iterable[tuple[int, T]], order: int, zero: T):
        if order < 0:
            raise ValueError("truncation order must be non-negative")
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        self.coeffs = {}
        for k, c in items:
            if k < 0:
                raise ValueError("negative eps power")
            if k <= order and c:
                self.coeffs[k] = c
        self.order = order
        self.zero = zero

    def __getitem__(self, k: int) -> T:
        if k > self.order:
            raise TruncationError(f"eps^{k} is beyond the truncation order {self.order}")
        return self.coeffs.get(k, self.zero)

    def __iter__(self):
        return (self[k] for k in range(self.order + 1))

    def nonzero_orders(self) -> list[int]:
        return sorted(self.coeffs)

    def valuation(self) -> int | None:
        return min(self.coeffs) if self.coeffs else None

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def truncate(self, E: int) -> "EpsSeries[T]":
        if E > self.order:
            raise TruncationError(f"cannot extend a series known to order {self.order} to {E}")
        return EpsSeries({k: c for k, c in self.coeffs.items() if k <= E}, E, self.zero)

    def _binary(self, other: "EpsSeries[T]", op) -> "EpsSeries[T]":
        E = min(self.order, other.order)
        keys = {k for k in self.coeffs if k <= E} | {k for k in other.coeffs if k <= E}
        return EpsSeries({k: op(self[k], other[k]) for k in keys}, E, self.zero)

    def __add__(self, other):
        return self._binary(other, operator.add)

    def __sub__(self, other):
        return self._binary(other, operator.sub)

    def __neg__(self):
        return EpsSeries({k: -c for k, c in self.coeffs.items()}, self.order, self.zero)

    def scale(self, c) -> "EpsSeries[T]":
        return EpsSeries({k: v.scale(c) for k, v in self.coeffs.items()}, self.order, self.zero)

    def map(self, fn: Callable[[T], T], zero=None) -> "EpsSeries":
        return EpsSeries({k: fn(c) for k, c in self.coeffs.items()}, self.order,
                         self.zero if zero is None else zero)

    def shift(self, k: int) -> "EpsSeries[T]":
        """Multiply by ``eps^k`` (terms pushed past the order are dropped)."""
        return EpsSeries({j + k: c for j, c in self.coeffs.items()}, self.order, self.zero)

    def mul(self, other: "EpsSeries", product: Callable = operator.mul, zero=None) -> "EpsSeries":
        """Cauchy product truncated at the smaller order."""
        E = min(self.order, other.order)
        out: dict[int, object] = {}
        for i, a in self.coeffs.items():
            if i > E:
                continue
            for j, b in other.coeffs.items():
                if i + j > E:
                    continue
                p = product(a, b)
                out[i + j] = out[i + j] + p if i + j in out else p
        return EpsSeries(out, E, self.zero if zero is None else zero)

    def __mul__(self, other):
        return self.mul(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpsSeries):
            return NotImplemented
        return self.order == other.order and self.coeffs == other.coeffs

    def __repr__(self) -> str:
        body = ", ".join(f"eps^{k}: {c}" for k, c in sorted(self.coeffs.items()))
        return f"EpsSeries({{{body}}}, order={self.order})"
