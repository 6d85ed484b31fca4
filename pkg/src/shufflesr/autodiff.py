"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps a numpy array and, when gradients are requested, records
the operation that produced it together with a vector-Jacobian product (VJP)
closure.  Calling :meth:`Tensor.backward` on a scalar result walks the
recorded graph once in reverse topological order and accumulates ``.grad``
on every leaf that has ``requires_grad`` set.

Only same-shape binary operations (plus python scalars) are supported; the
network never needs general broadcasting.  A recorded graph is single-writer:
do not share one forward pass between threads.  The operations themselves are
pure and safe to call concurrently on distinct tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Epsilon added inside the root of the sqrt *derivative* only; the forward
# value stays exact so e.g. sqrt(64.0) == 8.0 bit-for-bit.
SQRT_GRAD_EPS = 1e-12


class Tensor:
    """A numpy array plus optional gradient bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        # Without grad there is nothing to backpropagate, so the graph edge
        # is dropped and intermediates stay collectable in eval loops.
        self._parents = _parents if self.requires_grad else ()
        self._vjp = _vjp if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return self.data.item()

    def detach(self):
        """A view of the same data with no graph history."""
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- graph traversal ----------------------------------------------------

    def backward(self):
        """Backpropagate from a scalar; visits every recorded op exactly once."""
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.shape}")

        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._vjp is None or node.grad is None:
                continue
            parent_grads = node._vjp(node.grad)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.data.shape:
                    raise RuntimeError(
                        f"gradient shape {pg.shape} != input shape {parent.data.shape}"
                    )
                if parent.grad is None:
                    parent.grad = pg
                else:
                    parent.grad = parent.grad + pg
            # Interior grads are not needed once consumed; keep leaves only.
            node.grad = None
            node._parents = ()
            node._vjp = None

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _topo_order(root):
    """Reverse topological order of the graph below ``root`` (iterative DFS)."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def _needs_grad(*tensors):
    return any(t.requires_grad for t in tensors)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same_shape(a, b, op):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


# -- elementwise primitives ---------------------------------------------------


def add(a, b):
    if not isinstance(b, Tensor) and not isinstance(a, Tensor):
        raise TypeError("add needs at least one Tensor")
    if not isinstance(b, Tensor):  # tensor + scalar
        out = Tensor(a.data + b, _needs_grad(a), (a,), None)
        if out.requires_grad:
            out._vjp = lambda g: (g,)
        return out
    if not isinstance(a, Tensor):
        return add(b, a)
    _check_same_shape(a, b, "add")
    out = Tensor(a.data + b.data, _needs_grad(a, b), (a, b), None)
    if out.requires_grad:
        out._vjp = lambda g: (g, g)
    return out


def sub(a, b):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        out = Tensor(a.data - b, _needs_grad(a), (a,), None)
        if out.requires_grad:
            out._vjp = lambda g: (g,)
        return out
    if not isinstance(a, Tensor) and isinstance(b, Tensor):  # scalar - tensor
        out = Tensor(a - b.data, _needs_grad(b), (b,), None)
        if out.requires_grad:
            out._vjp = lambda g: (-g,)
        return out
    _check_same_shape(a, b, "sub")
    out = Tensor(a.data - b.data, _needs_grad(a, b), (a, b), None)
    if out.requires_grad:
        out._vjp = lambda g: (g, -g)
    return out


def mul(a, b):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        out = Tensor(a.data * b, _needs_grad(a), (a,), None)
        if out.requires_grad:
            out._vjp = lambda g: (g * b,)
        return out
    if not isinstance(a, Tensor):
        return mul(b, a)
    _check_same_shape(a, b, "mul")
    out = Tensor(a.data * b.data, _needs_grad(a, b), (a, b), None)
    if out.requires_grad:
        ad, bd = a.data, b.data
        out._vjp = lambda g: (g * bd, g * ad)
    return out


def div(a, b):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return mul(a, 1.0 / b)
    if not isinstance(a, Tensor) and isinstance(b, Tensor):
        out = Tensor(a / b.data, _needs_grad(b), (b,), None)
        if out.requires_grad:
            bd = b.data
            out._vjp = lambda g: (-g * a / (bd * bd),)
        return out
    _check_same_shape(a, b, "div")
    out = Tensor(a.data / b.data, _needs_grad(a, b), (a, b), None)
    if out.requires_grad:
        ad, bd = a.data, b.data
        out._vjp = lambda g: (g / bd, -g * ad / (bd * bd))
    return out


def sqrt(a):
    """Elementwise square root; derivative stabilized near zero.

    Forward is the exact numpy sqrt.  The backward pass uses
    ``0.5 / sqrt(x + SQRT_GRAD_EPS)`` so gradients stay finite where the
    argument touches zero (flat gradient-magnitude regions).
    """
    out = Tensor(np.sqrt(a.data), _needs_grad(a), (a,), None)
    if out.requires_grad:
        ad = a.data
        out._vjp = lambda g: (g * (0.5 / np.sqrt(ad + SQRT_GRAD_EPS)),)
    return out


def square(a):
    return mul(a, a)


# -- reductions ---------------------------------------------------------------


def tsum(a):
    out = Tensor(np.sum(a.data), _needs_grad(a), (a,), None)
    if out.requires_grad:
        shape, dtype = a.data.shape, a.data.dtype
        out._vjp = lambda g: (np.full(shape, g, dtype=dtype),)
    return out


def tmean(a):
    out = Tensor(np.mean(a.data), _needs_grad(a), (a,), None)
    if out.requires_grad:
        shape, dtype, n = a.data.shape, a.data.dtype, a.data.size
        out._vjp = lambda g: (np.full(shape, g / n, dtype=dtype),)
    return out


def reshape(a, shape):
    out = Tensor(a.data.reshape(shape), _needs_grad(a), (a,), None)
    if out.requires_grad:
        orig = a.data.shape
        out._vjp = lambda g: (g.reshape(orig),)
    return out


# -- gradient verification ----------------------------------------------------


class GradCheckError(ValueError):
    pass


@dataclass
class GradCheckReport:
    """Outcome of one finite-difference comparison."""

    max_rel_error: float
    tol: float
    n_checked: int
    worst: tuple  # (input index, flat coordinate)

    @property
    def passed(self):
        return self.max_rel_error <= self.tol


def grad_check(op, inputs, tol=1e-4, step=1e-5, seed=0, sample=None):
    """Compare the recorded VJP of ``op`` against central finite differences.

    ``op`` maps one or more Tensors to a Tensor; a non-scalar output is
    reduced with a fixed random weighting so the whole Jacobian is probed.
    Every coordinate of every input is perturbed by ``±step`` unless
    ``sample`` bounds the number of probed coordinates per input (seeded,
    without replacement).  Inputs must be float64 and, when probed fully,
    hold at most 1000 elements each.
    """
    if isinstance(inputs, Tensor):
        inputs = (inputs,)
    leaves = []
    for t in inputs:
        arr = np.array(t.data if isinstance(t, Tensor) else t, dtype=None)
        if arr.dtype != np.float64:
            raise GradCheckError(f"grad_check requires float64 inputs, got {arr.dtype}")
        if sample is None and arr.size > 1000:
            raise GradCheckError(
                f"input has {arr.size} elements; pass sample= to probe a subset"
            )
        leaves.append(Tensor(arr.copy(), requires_grad=True))

    rng = np.random.default_rng(seed)

    out = op(*leaves)
    if not np.all(np.isfinite(out.data)):
        raise GradCheckError("op produced non-finite values")
    weights = rng.standard_normal(out.data.shape)

    def scalar_loss(tensors):
        o = op(*tensors)
        return float(np.sum(o.data * weights))

    loss = tsum(mul(out, Tensor(weights)))
    loss.backward()
    analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]

    max_rel = 0.0
    worst = (0, 0)
    n_checked = 0
    for idx, leaf in enumerate(leaves):
        coords = np.arange(leaf.data.size)
        if sample is not None and leaf.data.size > sample:
            coords = rng.choice(leaf.data.size, size=sample, replace=False)
        flat = leaf.data.reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            f_plus = scalar_loss(leaves)
            flat[c] = orig - step
            f_minus = scalar_loss(leaves)
            flat[c] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            an = analytic[idx].reshape(-1)[c]
            if not (np.isfinite(fd) and np.isfinite(an)):
                raise GradCheckError("non-finite value during finite differencing")
            rel = abs(an - fd) / max(abs(an), abs(fd), 1e-4)
            n_checked += 1
            if rel > max_rel:
                max_rel = rel
                worst = (idx, int(c))

    return GradCheckReport(max_rel_error=max_rel, tol=tol, n_checked=n_checked, worst=worst)
