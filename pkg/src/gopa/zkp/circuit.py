"""A small builder that turns relations between committed integers into sigma statements.

Prover and verifier run the same construction code.  The prover supplies
values and collects the auxiliary commitments it creates; the verifier
replays the construction, consuming those commitments from the proof, and
ends up with an identical statement tree.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from gopa.crypto.groups import Element
from gopa.crypto.hashing import Drbg
from gopa.crypto.pedersen import GroupParams
from gopa.zkp.sigma import And, Eq, Node, Or, ProofError


class MalformedProof(ValueError):
    """The proof does not carry the auxiliary data the statement needs."""


class Wire:
    """A committed integer.  value/rand are known to the prover only."""

    __slots__ = ("id", "c", "value", "rand")

    def __init__(self, wid: int, c: Element, value: Optional[int], rand: Optional[int]) -> None:
        self.id = wid
        self.c = c
        self.value = value
        self.rand = rand

    @property
    def v(self) -> str:
        return f"v{self.id}"

    @property
    def r(self) -> str:
        return f"r{self.id}"

    def __mul__(self, k: int) -> "Lin":
        return Lin([(self, k)])

    __rmul__ = __mul__

    def __add__(self, other) -> "Lin":
        return Lin.of(self) + other

    __radd__ = __add__

    def __sub__(self, other) -> "Lin":
        return Lin.of(self) - other

    def __rsub__(self, other) -> "Lin":
        return Lin.of(other) - self

    def __neg__(self) -> "Lin":
        return Lin([(self, -1)])


Term = Tuple[Wire, int]


class Lin:
    """Integer linear combination sum(coef * wire) + const."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Sequence[Term] = (), const: int = 0) -> None:
        self.terms = list(terms)
        self.const = const

    @staticmethod
    def of(x: Union["Lin", Wire, int]) -> "Lin":
        if isinstance(x, Lin):
            return x
        if isinstance(x, Wire):
            return Lin([(x, 1)])
        return Lin([], int(x))

    def __add__(self, other: Union["Lin", Wire, int]) -> "Lin":
        o = Lin.of(other)
        return Lin(self.terms + o.terms, self.const + o.const)

    __radd__ = __add__

    def __neg__(self) -> "Lin":
        return Lin([(w, -a) for w, a in self.terms], -self.const)

    def __sub__(self, other: Union["Lin", Wire, int]) -> "Lin":
        return self + (-Lin.of(other))

    def __rsub__(self, other: Union["Lin", Wire, int]) -> "Lin":
        return Lin.of(other) - self

    def __mul__(self, k: int) -> "Lin":
        return Lin([(w, a * k) for w, a in self.terms], self.const * k)

    __rmul__ = __mul__


def lin(x: Union[Lin, Wire, int]) -> Lin:
    return Lin.of(x)


class Circuit:
    def __init__(self, params: GroupParams, *, prover: bool, aux: Optional[Sequence[Element]] = None,
                 rng: Optional[Drbg] = None, check: bool = True, public: bytes = b"") -> None:
        self.pp = params
        self.G = params.group
        self.q = params.group.q
        self.prover = prover
        self.check = check
        self.rng = rng or Drbg()
        self.aux_out: List[Element] = []
        self._aux_in: Optional[Iterator[Element]] = iter(aux) if aux is not None else None
        self.witness: Dict[str, int] = {}
        self._stack: List[List[Node]] = [[]]
        self._sim = 0
        self._ids = 0
        self._zeros = 0
        self._scope = 0
        self._scope_stack: List[int] = [0]
        self._opened: set = set()
        self._g_inv = self.G.inv(params.g)
        # public parameters plus every input and aux commitment, in order;
        # together with the construction code these fix the statement tree
        self._desc: List[bytes] = [len(public).to_bytes(4, "big"), public]

    # -- state ------------------------------------------------------------
    @property
    def real(self) -> bool:
        """True while the prover builds a branch it actually proves."""
        return self.prover and self._sim == 0

    def _next_id(self) -> int:
        self._ids += 1
        return self._ids

    def _emit(self, node: Node) -> None:
        self._stack[-1].append(node)

    # -- wires ------------------------------------------------------------
    def input(self, c: Element, value: Optional[int] = None, rand: Optional[int] = None) -> Wire:
        w = Wire(self._next_id(), c, value, rand)
        self._register(w)
        return w

    def new(self, value: Optional[int] = None) -> Wire:
        """Commit to a fresh value (prover) or read the next commitment (verifier)."""
        wid = self._next_id()
        if self.prover:
            v = 0 if value is None else int(value)
            r = self.rng.randbelow(self.q)
            G = self.G
            c = G.mul(G.exp(self.pp.g, v), G.exp(self.pp.h, r))
            self.aux_out.append(c)
            w = Wire(wid, c, v, r)
        else:
            try:
                c = next(self._aux_in)  # type: ignore[arg-type]
            except (StopIteration, TypeError):
                raise MalformedProof("proof carries too few commitments")
            w = Wire(wid, c, None, None)
        self._register(w)
        return w

    def _register(self, w: Wire) -> None:
        self._desc.append(self.G.encode(w.c))
        if self.prover and w.value is not None:
            self.witness[w.v] = w.value % self.q
            if w.rand is not None:
                self.witness[w.r] = w.rand % self.q

    def statement_bytes(self) -> bytes:
        return b"".join(self._desc)

    def finish(self) -> Node:
        if len(self._stack) != 1:
            raise RuntimeError("unbalanced Or construction")
        if not self.prover and self._aux_in is not None and next(self._aux_in, None) is not None:
            raise MalformedProof("proof carries surplus commitments")
        return And(self._stack[0])

    # -- linear combinations ---------------------------------------------
    def lin_commitment(self, x: Union[Lin, Wire, int]) -> Element:
        L = Lin.of(x)
        G = self.G
        acc = G.exp(self.pp.g, L.const) if L.const else G.identity
        for w, a in L.terms:
            if a == 1:
                acc = G.mul(acc, w.c)
            elif a == -1:
                acc = G.mul(acc, G.inv(w.c))
            elif a:
                acc = G.mul(acc, G.exp(w.c, a))
        return acc

    def lin_opening(self, x: Union[Lin, Wire, int]) -> Tuple[int, int]:
        L = Lin.of(x)
        v, r = L.const, 0
        for w, a in L.terms:
            v += a * (w.value or 0)
            r += a * (w.rand or 0)
        return v, r

    def _zero_leaf(self, C: Element, rand: int) -> None:
        self._zeros += 1
        name = f"z{self._zeros}"
        if self.prover:
            self.witness[name] = rand % self.q
        self._emit(Eq(C, [(self.pp.h, name)]))

    def assert_zero(self, x: Union[Lin, Wire, int]) -> None:
        """The combination opens to 0 (knowledge of its h-exponent)."""
        if self.prover:
            v, r = self.lin_opening(x)
            if self.real and self.check and v % self.q:
                raise ProofError("linear relation does not hold")
        else:
            r = 0
        self._zero_leaf(self.lin_commitment(x), r)

    def assert_equal(self, a: Union[Lin, Wire, int], b: Union[Lin, Wire, int]) -> None:
        self.assert_zero(Lin.of(a) - b)

    def assert_opening(self, w: Wire) -> None:
        key = (self._scope_stack[-1], w.id)
        if key in self._opened:
            return
        self._opened.add(key)
        self._emit(Eq(w.c, [(self.pp.g, w.v), (self.pp.h, w.r)]))

    # -- products and divisions ------------------------------------------
    def assert_product(self, a: Wire, b: Wire, out: Wire) -> None:
        """out = a * b (mod q), via out.c = a.c^b h^(r_out - b r_a)."""
        self.assert_opening(b)
        name = f"s{out.id}_{a.id}_{b.id}"
        if self.prover:
            if self.real and self.check and (out.value - a.value * b.value) % self.q:
                raise ProofError("product relation does not hold")
            self.witness[name] = ((out.rand or 0) - (b.value or 0) * (a.rand or 0)) % self.q
        self._emit(Eq(out.c, [(a.c, b.v), (self.pp.h, name)]))

    def mul(self, a: Wire, b: Wire) -> Wire:
        out = self.new(a.value * b.value if self.prover and a.value is not None and b.value is not None else None)
        self.assert_product(a, b, out)
        return out

    def div_round(self, num: Union[Lin, Wire], den: int, rem_bits: Optional[int] = None) -> Wire:
        """Commit to round(num / den) for a public den > 0.

        The remainder num - den*out is shown to lie in [-2^(k-1), 2^(k-1)) with
        2^(k-1) >= ceil(den/2), so the quotient is exact up to one unit.
        """
        from gopa.numerics import rdiv

        num = Lin.of(num)
        if rem_bits is None:
            rem_bits = max(1, (den // 2 + (den & 1)).bit_length() + 1)
        value = None
        if self.prover:
            v, _ = self.lin_opening(num)
            value = rdiv(v, den)
        out = self.new(value)
        self.assert_signed_range(num - out * den, rem_bits - 1)
        return out

    def mul_round(self, a: Wire, b: Wire, den: int, rem_bits: Optional[int] = None) -> Tuple[Wire, Wire]:
        """(product wire, round(a*b/den) wire)."""
        p = self.mul(a, b)
        return p, self.div_round(p, den, rem_bits)

    # -- bits and ranges --------------------------------------------------
    def assert_bit(self, w: Wire) -> None:
        G, h = self.G, self.pp.h
        real = 0
        if self.real:
            if w.value not in (0, 1):
                if self.check:
                    raise ProofError("committed value is not a bit")
            else:
                real = w.value
        one = G.mul(w.c, self._g_inv)
        self._emit(Or([Eq(w.c, [(h, w.r)]), Eq(one, [(h, w.r)])], real=real))

    def _weighted_bits(self, bits: Sequence[Wire]) -> Element:
        # prod c_i^(2^i) by Horner, squarings only
        G = self.G
        acc = G.identity
        for b in reversed(bits):
            acc = G.mul(G.mul(acc, acc), b.c)
        return acc

    def assert_range(self, x: Union[Lin, Wire], nbits: int) -> List[Wire]:
        """value(x) in [0, 2^nbits) by bit decomposition."""
        x = Lin.of(x)
        if nbits < 1:
            raise ValueError("nbits must be positive")
        v = 0
        if self.prover:
            v, _ = self.lin_opening(x)
            if self.real and self.check and not 0 <= v < (1 << nbits):
                raise ProofError(f"value outside [0, 2^{nbits})")
            v %= 1 << nbits
        bits = [self.new((v >> i) & 1 if self.prover else None) for i in range(nbits)]
        for b in bits:
            self.assert_bit(b)
        C = self.G.mul(self.lin_commitment(x), self.G.inv(self._weighted_bits(bits)))
        r = 0
        if self.prover:
            _, rx = self.lin_opening(x)
            r = rx - sum((b.rand << i) for i, b in enumerate(bits))
            if self.real and self.check:
                vx, _ = self.lin_opening(x)
                if vx != sum(b.value << i for i, b in enumerate(bits)):
                    raise ProofError("bit decomposition mismatch")
        self._zero_leaf(C, r)
        return bits

    def assert_signed_range(self, x: Union[Lin, Wire], bits: int) -> None:
        """value(x) in [-2^bits, 2^bits)."""
        self.assert_range(Lin.of(x) + (1 << bits), bits + 1)

    def assert_interval(self, x: Union[Lin, Wire], lo: int, hi: int) -> None:
        """value(x) in [lo, hi], two one-sided decompositions of l bits."""
        if hi < lo:
            raise ValueError("empty interval")
        x = Lin.of(x)
        span = hi - lo
        nbits = max(1, span.bit_length())
        self.assert_range(x - lo, nbits)
        if span != (1 << nbits) - 1:
            self.assert_range(hi - x, nbits)

    # -- disjunctions -----------------------------------------------------
    @contextmanager
    def either(self, real: int) -> Iterator["_OrBuilder"]:
        """Build an Or; the prover proves branch `real`, simulates the others."""
        ob = _OrBuilder(self, real if self.real else 0)
        self._stack.append([])
        yield ob
        children = self._stack.pop()
        self._emit(Or(children, real=ob.real))


class _OrBuilder:
    def __init__(self, circ: Circuit, real: int) -> None:
        self.c = circ
        self.real = real
        self.count = 0

    @contextmanager
    def option(self) -> Iterator[bool]:
        """Yields True when this option is the one the prover really proves."""
        c = self.c
        idx = self.count
        self.count += 1
        is_real = c.real and idx == self.real
        simulated = c.prover and c._sim == 0 and idx != self.real
        if simulated:
            c._sim += 1
        c._scope += 1
        c._scope_stack.append(c._scope)
        c._stack.append([])
        try:
            yield is_real
        finally:
            body = c._stack.pop()
            c._scope_stack.pop()
            if simulated:
                c._sim -= 1
            c._stack[-1].append(And(body))
