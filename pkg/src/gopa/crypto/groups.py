"""Prime-order groups behind one interface.

Two backend families are provided: Schnorr subgroups of Z_p^* (a q=101 toy
group for hand checks and safe-prime groups for real runs) and secp256k1 as
the curve-style production backend.  Group elements are opaque to callers;
they are compared with ==, combined with mul/exp and serialised with encode.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from collections import Counter
from typing import Any, Dict, Optional, Tuple

import gmpy2
from gmpy2 import mpz

from gopa.crypto.hashing import expand, hash_parts

Element = Any


class ConfigurationError(ValueError):
    """Invalid backend choice or parameters too small for the requested values."""


class OpCounter:
    """Tallies group operations; used for complexity accounting."""

    def __init__(self) -> None:
        self.counts: Counter = Counter()
        self._lock = threading.Lock()

    def add(self, kind: str, n: int = 1) -> None:
        self.counts[kind] += n

    def snapshot(self) -> Dict[str, int]:
        return dict(self.counts)

    def reset(self) -> None:
        self.counts.clear()


class Group(ABC):
    name: str
    backend: str
    q: int

    def __init__(self) -> None:
        self.ops = OpCounter()

    @property
    @abstractmethod
    def identity(self) -> Element: ...

    @property
    @abstractmethod
    def generator(self) -> Element:
        """A fixed public generator (used for signatures, not commitments)."""

    @abstractmethod
    def mul(self, a: Element, b: Element) -> Element: ...

    @abstractmethod
    def exp(self, a: Element, e: int) -> Element: ...

    @abstractmethod
    def inv(self, a: Element) -> Element: ...

    @abstractmethod
    def encode(self, a: Element) -> bytes: ...

    @abstractmethod
    def decode(self, data: bytes) -> Element: ...

    @abstractmethod
    def hash_to_group(self, tag: str, data: bytes) -> Element: ...

    @abstractmethod
    def is_element(self, a: Element) -> bool: ...

    @property
    @abstractmethod
    def element_len(self) -> int: ...

    @property
    def scalar_len(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def div(self, a: Element, b: Element) -> Element:
        return self.mul(a, self.inv(b))

    def multi_exp(self, pairs) -> Element:
        acc = self.identity
        for base, e in pairs:
            acc = self.mul(acc, self.exp(base, e))
        return acc

    def capacity_bits(self) -> int:
        """Largest b such that signed integers of magnitude < 2**b embed without wrap."""
        return self.q.bit_length() - 2

    def require_capacity(self, bits: int, what: str = "values") -> None:
        if bits > self.capacity_bits():
            raise ConfigurationError(
                f"group {self.name} (q of {self.q.bit_length()} bits) too small for {what} "
                f"needing {bits} bits; choose a larger backend")

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class SchnorrGroup(Group):
    """Order-q subgroup of Z_p^* with p = k q + 1."""

    backend = "test_schnorr_group"

    def __init__(self, name: str, p: int, q: int) -> None:
        super().__init__()
        if (p - 1) % q:
            raise ConfigurationError("q must divide p - 1")
        self.name = name
        self.p = mpz(p)
        self.q = int(q)
        self._cofactor = (p - 1) // q
        self._one = mpz(1)
        self._gen = self.hash_to_group("gopa/generator", name.encode())

    @property
    def identity(self) -> Element:
        return self._one

    @property
    def generator(self) -> Element:
        return self._gen

    def mul(self, a: Element, b: Element) -> Element:
        self.ops.counts["mul"] += 1
        return a * b % self.p

    def exp(self, a: Element, e: int) -> Element:
        self.ops.counts["exp"] += 1
        if e < 0 and -e < self.q:
            # small negative exponents stay small
            return gmpy2.powmod(gmpy2.invert(a, self.p), -e, self.p)
        return gmpy2.powmod(a, e % self.q, self.p)

    def inv(self, a: Element) -> Element:
        return gmpy2.invert(a, self.p)

    @property
    def element_len(self) -> int:
        return (int(self.p).bit_length() + 7) // 8

    def encode(self, a: Element) -> bytes:
        return int(a).to_bytes(self.element_len, "big")

    def decode(self, data: bytes) -> Element:
        if len(data) != self.element_len:
            raise ValueError("bad element length")
        a = mpz(int.from_bytes(data, "big"))
        if not self.is_element(a):
            raise ValueError("not a subgroup element")
        return a

    def is_element(self, a: Element) -> bool:
        try:
            a = mpz(a)
        except (TypeError, ValueError):
            return False
        if not 0 < a < self.p:
            return False
        if self._cofactor == 2:
            # quadratic residues are exactly the order-q subgroup
            return gmpy2.legendre(a, self.p) == 1
        return gmpy2.powmod(a, self.q, self.p) == 1

    def hash_to_group(self, tag: str, data: bytes) -> Element:
        nbytes = (int(self.p).bit_length() + 128 + 7) // 8
        ctr = 0
        while True:
            x = int.from_bytes(expand(hash_parts(tag, data, ctr), nbytes), "big") % int(self.p)
            e = gmpy2.powmod(mpz(x), self._cofactor, self.p)
            if e not in (0, 1):
                return e
            ctr += 1


# secp256k1 ---------------------------------------------------------------

_SECP_P = 2 ** 256 - 2 ** 32 - 977
_SECP_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
_SECP_G = (0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
           0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8)

Point = Optional[Tuple[int, int]]


class Secp256k1Group(Group):
    """Affine points on y^2 = x^3 + 7; None is the point at infinity.

    Pure Python and not constant time: the interface contract is what
    matters here, hardening is out of scope.
    """

    backend = "production_curve_style"

    def __init__(self) -> None:
        super().__init__()
        self.name = "secp256k1"
        self.q = _SECP_N
        self._P = _SECP_P

    @property
    def identity(self) -> Element:
        return None

    @property
    def generator(self) -> Element:
        return _SECP_G

    def _to_jac(self, a: Point):
        return (1, 1, 0) if a is None else (a[0], a[1], 1)

    def _from_jac(self, j) -> Point:
        X, Y, Z = j
        if Z == 0:
            return None
        P = self._P
        zi = pow(Z, -1, P)
        zi2 = zi * zi % P
        return (X * zi2 % P, Y * zi2 * zi % P)

    def _jdouble(self, j):
        X, Y, Z = j
        P = self._P
        if Z == 0 or Y == 0:
            return (1, 1, 0)
        S = 4 * X * Y * Y % P
        Mv = 3 * X * X % P
        X3 = (Mv * Mv - 2 * S) % P
        Y3 = (Mv * (S - X3) - 8 * Y ** 4) % P
        Z3 = 2 * Y * Z % P
        return (X3, Y3, Z3)

    def _jadd(self, j1, j2):
        X1, Y1, Z1 = j1
        X2, Y2, Z2 = j2
        P = self._P
        if Z1 == 0:
            return j2
        if Z2 == 0:
            return j1
        Z1s, Z2s = Z1 * Z1 % P, Z2 * Z2 % P
        U1, U2 = X1 * Z2s % P, X2 * Z1s % P
        S1, S2 = Y1 * Z2s * Z2 % P, Y2 * Z1s * Z1 % P
        if U1 == U2:
            if S1 != S2:
                return (1, 1, 0)
            return self._jdouble(j1)
        H = (U2 - U1) % P
        R = (S2 - S1) % P
        H2 = H * H % P
        H3 = H * H2 % P
        U1H2 = U1 * H2 % P
        X3 = (R * R - H3 - 2 * U1H2) % P
        Y3 = (R * (U1H2 - X3) - S1 * H3) % P
        Z3 = H * Z1 * Z2 % P
        return (X3, Y3, Z3)

    def mul(self, a: Element, b: Element) -> Element:
        self.ops.counts["mul"] += 1
        return self._from_jac(self._jadd(self._to_jac(a), self._to_jac(b)))

    def exp(self, a: Element, e: int) -> Element:
        self.ops.counts["exp"] += 1
        e %= self.q
        acc = (1, 1, 0)
        base = self._to_jac(a)
        for bit in bin(e)[2:]:
            acc = self._jdouble(acc)
            if bit == "1":
                acc = self._jadd(acc, base)
        return self._from_jac(acc)

    def inv(self, a: Element) -> Element:
        return None if a is None else (a[0], (-a[1]) % self._P)

    @property
    def element_len(self) -> int:
        return 33

    def encode(self, a: Element) -> bytes:
        if a is None:
            return b"\x00" * 33
        return bytes([2 + (a[1] & 1)]) + a[0].to_bytes(32, "big")

    def decode(self, data: bytes) -> Element:
        if len(data) != 33:
            raise ValueError("bad element length")
        if data == b"\x00" * 33:
            return None
        if data[0] not in (2, 3):
            raise ValueError("bad point prefix")
        x = int.from_bytes(data[1:], "big")
        y = self._lift_x(x)
        if y is None:
            raise ValueError("x not on curve")
        if (y & 1) != (data[0] & 1):
            y = self._P - y
        return (x, y)

    def _lift_x(self, x: int) -> Optional[int]:
        P = self._P
        if not 0 <= x < P:
            return None
        rhs = (pow(x, 3, P) + 7) % P
        y = pow(rhs, (P + 1) // 4, P)
        return y if y * y % P == rhs else None

    def is_element(self, a: Element) -> bool:
        if a is None:
            return True
        try:
            x, y = a
        except (TypeError, ValueError):
            return False
        return (y * y - x ** 3 - 7) % self._P == 0

    def hash_to_group(self, tag: str, data: bytes) -> Element:
        ctr = 0
        while True:
            x = int.from_bytes(expand(hash_parts(tag, data, ctr), 48), "big") % self._P
            y = self._lift_x(x)
            if y is not None:
                return (x, y if y % 2 == 0 else self._P - y)
            ctr += 1


# registry ------------------------------------------------------------------

_SAFE_PRIMES = {
    "schnorr61": (0x287C36744D35E217, 0x143E1B3A269AF10B),
    "schnorr127": (0xFFBE774FA47921529BEFAD4C9777681B, 0x7FDF3BA7D23C90A94DF7D6A64BBBB40D),
    "schnorr255": (0xCAED5E013AF20AE51449A341F2EFE42E3EA642AE082FCF32024D2B3C9D94B613,
                   0x6576AF009D7905728A24D1A0F977F2171F5321570417E7990126959E4ECA5B09),
}

BACKENDS = ("toy101", "schnorr61", "schnorr127", "schnorr255", "secp256k1")

_cache: Dict[str, Group] = {}


def get_group(name: str) -> Group:
    """Return the (shared) group instance for a backend name."""
    if name in _cache:
        return _cache[name]
    if name == "toy101":
        grp: Group = SchnorrGroup("toy101", 607, 101)
    elif name in _SAFE_PRIMES:
        p, q = _SAFE_PRIMES[name]
        grp = SchnorrGroup(name, p, q)
    elif name == "secp256k1":
        grp = Secp256k1Group()
    else:
        raise ConfigurationError(f"unknown group backend {name!r}; choose one of {BACKENDS}")
    _cache[name] = grp
    return grp


def smallest_backend(bits: int) -> str:
    """Smallest Schnorr backend that embeds signed values of `bits` bits."""
    for name in ("schnorr61", "schnorr127", "schnorr255"):
        if get_group(name).capacity_bits() >= bits:
            return name
    raise ConfigurationError(f"no backend embeds {bits}-bit values")
