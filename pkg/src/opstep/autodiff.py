"""Nested automatic differentiation.

Two cooperating mechanisms:

* a reverse-mode gradient tape (:class:`Tape` / :class:`TapeVar`) for
  gradients of scalar losses with respect to trainable parameters, and
* forward-mode truncated-Taylor jets (:class:`Jet`) for pure derivatives of
  network outputs with respect to one query coordinate, up to order 3.

Jets are generic over the underlying scalar: coefficients may be floats,
float64 ndarrays (elementwise semantics, one value per batch entry), or
``TapeVar``s.  Running jet arithmetic over tape variables therefore records
the input-derivative computation on the tape, so one backward sweep yields
parameter gradients of losses that contain input derivatives
(reverse-over-forward nesting).

All payloads are 64-bit floats; third-order derivatives amplify rounding too
much for float32.
"""

from __future__ import annotations

import numpy as np

from .errors import JetSingularityError, TapeMismatchError, UnsupportedDerivativeError

__all__ = [
    "Tape",
    "TapeVar",
    "Jet",
    "jet_seed",
    "jet_const",
    "seed_coordinates",
    "grad",
    "grad_of_input_derivative",
    "as_value",
    "gtanh",
    "gsin",
    "gcos",
    "gexp",
    "gsquare",
]

_MAX_ORDER = 3
# binomial coefficients for the Leibniz rule, row k = C(k, 0..k)
_BINOM = ((1,), (1, 1), (1, 2, 1), (1, 3, 3, 1))


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverses numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tape:
    """Append-only record of array operations, replayed in reverse for adjoints.

    A node stores the parent node ids and one vector-Jacobian closure per
    parent.  The node list is an arena: :meth:`reset` clears it in place so a
    training loop reuses the same tape object every iteration.
    """

    def __init__(self):
        self._parents = []
        self._vjps = []
        self._values = []

    def __len__(self):
        return len(self._parents)

    def reset(self):
        self._parents.clear()
        self._vjps.clear()
        self._values.clear()

    def leaf(self, value):
        """Record an input (parameter) node and return its variable."""
        return self._record(np.asarray(value, dtype=np.float64), (), ())

    def _record(self, value, parents, vjps):
        idx = len(self._parents)
        self._parents.append(parents)
        self._vjps.append(vjps)
        self._values.append(value)
        return TapeVar(self, idx, value)

    def backward(self, root):
        """Adjoints of every node with respect to the scalar ``root``.

        Returns a list indexed by node id; entries are ``None`` for nodes that
        are not ancestors of the root (their adjoint is zero).  Repeated calls
        without re-recording give identical results.
        """
        if root.tape is not self:
            raise TapeMismatchError("root was recorded on a different tape")
        if np.size(root.value) != 1:
            raise ValueError("backward root must be a scalar")
        adjoints = [None] * len(self._parents)
        adjoints[root.idx] = np.ones_like(self._values[root.idx])
        parents, vjps = self._parents, self._vjps
        for i in range(root.idx, -1, -1):
            acc = adjoints[i]
            if acc is None:
                continue
            for pid, vjp in zip(parents[i], vjps[i]):
                # adjoint arrays are never mutated in place, so aliasing the
                # incoming adjoint (identity vjps) is safe
                contrib = vjp(acc)
                if adjoints[pid] is None:
                    adjoints[pid] = contrib
                else:
                    adjoints[pid] = adjoints[pid] + contrib
        return adjoints


def grad(root, variables):
    """Gradient of the scalar ``root`` with respect to a list of tape variables."""
    adjoints = root.tape.backward(root)
    out = []
    for v in variables:
        a = adjoints[v.idx]
        out.append(np.zeros_like(v.value) if a is None else a)
    return out


def _vjp_identity(shape):
    return lambda g: _unbroadcast(g, shape)


class TapeVar:
    """A float64 scalar or array recorded on a gradient tape.

    Supports the arithmetic the networks and losses need (elementwise ops with
    numpy broadcasting, matmul, reductions, reshape, basic slicing).  After a
    backward sweep from a scalar root, each leaf's adjoint equals the partial
    derivative of the root with respect to that leaf.
    """

    __slots__ = ("tape", "idx", "value")
    __array_ufunc__ = None  # keep numpy from consuming us in mixed expressions
    __array_priority__ = 1000

    def __init__(self, tape, idx, value):
        self.tape = tape
        self.idx = idx
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"TapeVar(idx={self.idx}, value={self.value!r})"

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, TapeVar):
            out = self.value + other.value
            return self.tape._record(
                out,
                (self.idx, other.idx),
                (_vjp_identity(self.value.shape), _vjp_identity(other.value.shape)),
            )
        out = self.value + other
        return self.tape._record(out, (self.idx,), (_vjp_identity(self.value.shape),))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, TapeVar):
            out = self.value - other.value
            sh_o = other.value.shape
            return self.tape._record(
                out,
                (self.idx, other.idx),
                (_vjp_identity(self.value.shape), lambda g: _unbroadcast(-g, sh_o)),
            )
        out = self.value - other
        return self.tape._record(out, (self.idx,), (_vjp_identity(self.value.shape),))

    def __rsub__(self, other):
        out = other - self.value
        sh = self.value.shape
        return self.tape._record(out, (self.idx,), (lambda g: _unbroadcast(-g, sh),))

    def __neg__(self):
        sh = self.value.shape
        return self.tape._record(-self.value, (self.idx,), (lambda g: _unbroadcast(-g, sh),))

    def __mul__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, TapeVar):
            a, b = self.value, other.value
            return self.tape._record(
                a * b,
                (self.idx, other.idx),
                (
                    lambda g: _unbroadcast(g * b, a.shape),
                    lambda g: _unbroadcast(g * a, b.shape),
                ),
            )
        a = self.value
        return self.tape._record(
            a * other, (self.idx,), (lambda g: _unbroadcast(g * other, a.shape),)
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, TapeVar):
            a, b = self.value, other.value
            return self.tape._record(
                a / b,
                (self.idx, other.idx),
                (
                    lambda g: _unbroadcast(g / b, a.shape),
                    lambda g: _unbroadcast(-g * a / (b * b), b.shape),
                ),
            )
        a = self.value
        return self.tape._record(
            a / other, (self.idx,), (lambda g: _unbroadcast(g / other, a.shape),)
        )

    def __rtruediv__(self, other):
        a = self.value
        out = other / a
        return self.tape._record(
            out, (self.idx,), (lambda g: _unbroadcast(-g * other / (a * a), a.shape),)
        )

    def __pow__(self, p):
        if p != 2:
            raise NotImplementedError("only squaring is supported")
        return self.square()

    def square(self):
        a = self.value
        return self.tape._record(
            a * a, (self.idx,), (lambda g: _unbroadcast(2.0 * g * a, a.shape),)
        )

    # -- nonlinearities ----------------------------------------------------

    def tanh(self):
        y = np.tanh(self.value)
        return self.tape._record(y, (self.idx,), (lambda g: g * (1.0 - y * y),))

    def sin(self):
        a = self.value
        return self.tape._record(np.sin(a), (self.idx,), (lambda g: g * np.cos(a),))

    def cos(self):
        a = self.value
        return self.tape._record(np.cos(a), (self.idx,), (lambda g: -g * np.sin(a),))

    def exp(self):
        y = np.exp(self.value)
        return self.tape._record(y, (self.idx,), (lambda g: g * y,))

    # -- linear algebra and structure --------------------------------------

    def __matmul__(self, other):
        if isinstance(other, Jet):
            return NotImplemented
        if isinstance(other, TapeVar):
            a, b = self.value, other.value
            return self.tape._record(
                a @ b,
                (self.idx, other.idx),
                (lambda g: g @ b.T, lambda g: a.T @ g),
            )
        a = self.value
        return self.tape._record(a @ other, (self.idx,), (lambda g: g @ other.T,))

    def __rmatmul__(self, other):
        b = self.value
        return self.tape._record(other @ b, (self.idx,), (lambda g: other.T @ g,))

    def sum(self, axis=None, keepdims=False):
        a = self.value
        out = a.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g, a.shape)
            gg = g if keepdims else np.expand_dims(g, axis)
            return np.broadcast_to(gg, a.shape)

        return self.tape._record(out, (self.idx,), (vjp,))

    def mean(self, axis=None, keepdims=False):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        a = self.value
        return self.tape._record(
            a.reshape(shape), (self.idx,), (lambda g: g.reshape(a.shape),)
        )

    def __getitem__(self, key):
        a = self.value
        out = a[key]

        def vjp(g):
            full = np.zeros_like(a)
            full[key] = g
            return full

        return self.tape._record(out, (self.idx,), (vjp,))


# ---------------------------------------------------------------------------
# forward mode: truncated Taylor jets
# ---------------------------------------------------------------------------


def _is_zero(c):
    return isinstance(c, float) and c == 0.0


def as_value(x):
    """Underlying float64 payload of a float/ndarray/TapeVar."""
    return x.value if isinstance(x, TapeVar) else x


class Jet:
    """Truncated Taylor scalar: value and pure derivatives up to order 3.

    ``coeffs`` holds ``[f, f', f'', f''']`` (derivatives, not scaled Taylor
    coefficients) with respect to one seeded input coordinate.  Coefficients
    may be floats, ndarrays, or TapeVars; the exact float ``0.0`` marks a
    structurally zero coefficient and is skipped in products.  Arithmetic is
    exact truncated-Taylor composition: products follow the Leibniz rule and
    unary functions the Faa di Bruno truncation, so the order-0 coefficient is
    computed by exactly the same operations as a plain (non-jet) evaluation.
    """

    __slots__ = ("order", "coeffs")
    __array_ufunc__ = None
    __array_priority__ = 2000

    def __init__(self, coeffs):
        if not 1 <= len(coeffs) <= _MAX_ORDER + 1:
            raise ValueError(f"jet order must be in 0..{_MAX_ORDER}")
        self.order = len(coeffs) - 1
        self.coeffs = list(coeffs)

    def __repr__(self):
        return f"Jet(order={self.order}, coeffs={self.coeffs!r})"

    @property
    def value(self):
        return self.coeffs[0]

    def _lift(self, other):
        """View a non-jet operand as a constant jet of matching order."""
        return Jet([other] + [0.0] * self.order)

    def _check(self, other):
        if other.order != self.order:
            raise ValueError("jet orders must match for binary operations")

    # -- linear ops ---------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet([self.coeffs[0] + other] + self.coeffs[1:])
        self._check(other)
        return Jet([_zadd(a, b) for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Jet):
            return Jet([self.coeffs[0] - other] + self.coeffs[1:])
        self._check(other)
        return Jet([_zsub(a, b) for a, b in zip(self.coeffs, other.coeffs)])

    def __rsub__(self, other):
        return Jet([other - self.coeffs[0]] + [_zneg(c) for c in self.coeffs[1:]])

    def __neg__(self):
        return Jet([_zneg(c) for c in self.coeffs])

    # -- products -----------------------------------------------------------

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet([_zscale(c, other) for c in self.coeffs])
        self._check(other)
        a, b = self.coeffs, other.coeffs
        out = []
        for k in range(self.order + 1):
            acc = None
            for j in range(k + 1):
                if _is_zero(a[j]) or _is_zero(b[k - j]):
                    continue
                term = a[j] * b[k - j]
                w = _BINOM[k][j]
                if w != 1:
                    term = term * float(w)
                acc = term if acc is None else acc + term
            out.append(0.0 if acc is None else acc)
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = self._lift(other)
        self._check(other)
        b0 = as_value(other.coeffs[0])
        if np.any(b0 == 0.0):
            raise JetSingularityError("division by a jet with zero leading coefficient")
        a, b = self.coeffs, other.coeffs
        c = [a[0] / b[0]]
        for k in range(1, self.order + 1):
            acc = a[k]
            for j in range(k):
                if _is_zero(c[j]) or _is_zero(b[k - j]):
                    continue
                term = c[j] * b[k - j]
                w = _BINOM[k][j]
                if w != 1:
                    term = term * float(w)
                acc = _zsub(acc, term)
            c.append(_zdiv(acc, b[0]))
        return Jet(c)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __matmul__(self, other):
        if isinstance(other, Jet):
            raise NotImplementedError("matmul between two jets is not needed")
        return Jet([c if _is_zero(c) else c @ other for c in self.coeffs])

    def __pow__(self, p):
        if p != 2:
            raise NotImplementedError("only squaring is supported")
        return self.square()

    # -- linear structural ops, applied per coefficient -----------------------

    def _map(self, fn):
        return Jet([c if _is_zero(c) else fn(c) for c in self.coeffs])

    def reshape(self, *shape):
        return self._map(lambda c: c.reshape(*shape))

    def sum(self, axis=None, keepdims=False):
        return self._map(lambda c: c.sum(axis=axis, keepdims=keepdims))

    def __getitem__(self, key):
        return self._map(lambda c: c[key])

    # -- univariate functions (Faa di Bruno, truncated) ----------------------

    def _compose(self, derivs):
        """Chain rule through g given ``derivs = [g(a0), g'(a0), ...]``."""
        a = self.coeffs
        out = [derivs[0]]
        if self.order >= 1:
            out.append(_zscale(a[1], derivs[1]))
        if self.order >= 2:
            t = None if _is_zero(a[1]) else derivs[2] * a[1] * a[1]
            u = None if _is_zero(a[2]) else derivs[1] * a[2]
            out.append(_zmerge(t, u))
        if self.order >= 3:
            t1 = None if _is_zero(a[1]) else derivs[3] * a[1] * a[1] * a[1]
            t2 = (
                None
                if (_is_zero(a[1]) or _is_zero(a[2]))
                else 3.0 * (derivs[2] * a[1] * a[2])
            )
            t3 = None if _is_zero(a[3]) else derivs[1] * a[3]
            out.append(_zmerge(_zmerge(t1, t2), t3))
        return Jet(out)

    def tanh(self):
        y = _call(np.tanh, self.coeffs[0])
        if self.order == 0:
            return Jet([y])
        s = 1.0 - y * y
        d = [y, s]
        if self.order >= 2:
            d.append(-2.0 * (y * s))
        if self.order >= 3:
            d.append(s * (6.0 * (y * y) - 2.0))
        return self._compose(d)

    def sin(self):
        a0 = self.coeffs[0]
        sn = _call(np.sin, a0)
        if self.order == 0:
            return Jet([sn])
        cs = _call(np.cos, a0)
        d = [sn, cs, -sn, -cs][: self.order + 1]
        return self._compose(d)

    def cos(self):
        a0 = self.coeffs[0]
        cs = _call(np.cos, a0)
        if self.order == 0:
            return Jet([cs])
        sn = _call(np.sin, a0)
        d = [cs, -sn, -cs, sn][: self.order + 1]
        return self._compose(d)

    def exp(self):
        y = _call(np.exp, self.coeffs[0])
        return self._compose([y] * (self.order + 1)) if self.order else Jet([y])

    def square(self):
        return self * self


def _call(np_fn, x):
    if isinstance(x, TapeVar):
        return getattr(x, np_fn.__name__)()
    return np_fn(x)


def _zadd(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _zsub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return -b
    return a - b


def _zneg(a):
    return 0.0 if _is_zero(a) else -a


def _zscale(a, s):
    return 0.0 if _is_zero(a) else a * s


def _zdiv(a, b):
    return 0.0 if _is_zero(a) else a / b


def _zmerge(a, b):
    if a is None and b is None:
        return 0.0
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def jet_seed(value, order):
    """Jet for the differentiated coordinate: derivative seed 1.

    ``value`` may be a float or an ndarray (a batch of seed points sharing one
    coordinate).
    """
    if not isinstance(order, int) or not 0 <= order <= _MAX_ORDER:
        raise ValueError(f"jet order must be an integer in 0..{_MAX_ORDER}")
    coeffs = [value]
    if order >= 1:
        seed = np.ones_like(value, dtype=np.float64) if isinstance(value, np.ndarray) else 1.0
        coeffs.append(seed)
        coeffs.extend([0.0] * (order - 1))
    return Jet(coeffs)


def jet_const(value, order):
    """Jet for a coordinate held fixed during this pass (all derivatives zero)."""
    if not isinstance(order, int) or not 0 <= order <= _MAX_ORDER:
        raise ValueError(f"jet order must be an integer in 0..{_MAX_ORDER}")
    return Jet([value] + [0.0] * order)


def seed_coordinates(coords, seed_index, order):
    """Seed exactly one coordinate of a query tuple for a jet pass.

    Returns a list of jets, one per coordinate.  Seeding more than one
    coordinate at a time (mixed partials) is rejected: every benchmark needs
    only pure derivatives, and each coordinate gets its own pass.
    """
    if isinstance(seed_index, (tuple, list, set)):
        raise UnsupportedDerivativeError(
            "cross-derivatives are unsupported; seed one coordinate per pass"
        )
    return [
        jet_seed(c, order) if i == seed_index else jet_const(c, order)
        for i, c in enumerate(coords)
    ]


def grad_of_input_derivative(build_loss, params, tape=None):
    """Parameter gradient of a loss that contains input-derivative terms.

    ``build_loss(param_vars)`` must evaluate the loss on the given tape
    variables, typically by running jet arithmetic over them, and return a
    scalar TapeVar.  Returns ``(loss_value, grads)`` with one gradient array
    per parameter.
    """
    tape = tape or Tape()
    tape.reset()
    pvars = [tape.leaf(p) for p in params]
    root = build_loss(pvars)
    return float(np.asarray(root.value)), grad(root, pvars)


def affine(x, w, b):
    """Fused ``x @ w + b`` (one tape node instead of two on the hot path).

    Handles plain arrays, TapeVars, and Jet inputs; ``w``/``b`` are treated
    as constant with respect to a jet's seeded coordinate, so higher jet
    coefficients see the matmul only.
    """
    if isinstance(x, Jet):
        rest = [c if _is_zero(c) else c @ w for c in x.coeffs[1:]]
        return Jet([affine(x.coeffs[0], w, b)] + rest)
    xv, wv, bv = as_value(x), as_value(w), as_value(b)
    val = xv @ wv + bv
    tape = None
    parents, vjps = [], []
    if isinstance(x, TapeVar):
        tape = x.tape
        parents.append(x.idx)
        vjps.append(lambda g: g @ wv.T)
    if isinstance(w, TapeVar):
        tape = w.tape
        parents.append(w.idx)
        vjps.append(lambda g: xv.T @ g)
    if isinstance(b, TapeVar):
        tape = b.tape
        parents.append(b.idx)
        vjps.append(lambda g: _unbroadcast(g, bv.shape))
    if tape is None:
        return val
    return tape._record(val, tuple(parents), tuple(vjps))


def gtanh(x):
    if isinstance(x, (Jet, TapeVar)):
        return x.tanh()
    return np.tanh(x)


def gsin(x):
    if isinstance(x, (Jet, TapeVar)):
        return x.sin()
    return np.sin(x)


def gcos(x):
    if isinstance(x, (Jet, TapeVar)):
        return x.cos()
    return np.cos(x)


def gexp(x):
    if isinstance(x, (Jet, TapeVar)):
        return x.exp()
    return np.exp(x)


def gsquare(x):
    if isinstance(x, (Jet, TapeVar)):
        return x.square()
    return x * x
