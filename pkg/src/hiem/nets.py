"""Function approximation: fully-connected nets with manual backprop,
optimizers, target-network sync, replay buffer and decay schedules.

Everything is float64 numpy.  Losses are mean squared error over the batch
on the selected output head only.  A NaN/Inf parameter after an update is a
hard fault.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericsError(RuntimeError):
    """Non-finite parameters, targets or activations."""


def relu(x):
    return np.maximum(0.0, x)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _he_init(fan_in, fan_out, rng):
    scale = np.sqrt(2.0 / max(fan_in, 1))
    return rng.normal(0.0, scale, size=(fan_in, fan_out))


class Mlp:
    """Fully-connected net: relu hidden layers, linear or sigmoid output.

    `sizes` lists all layer widths including input and output, e.g.
    [155, 128, 64, 6].  Two layers ([in, out]) make a plain linear map,
    which is what the tabular tests use.
    """

    def __init__(self, sizes, rng, output="linear"):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output not in ("linear", "sigmoid"):
            raise ValueError(f"unknown output activation {output!r}")
        self.sizes = list(int(s) for s in sizes)
        self.output = output
        self.W = [
            _he_init(a, b, rng) for a, b in zip(self.sizes[:-1], self.sizes[1:])
        ]
        self.b = [np.zeros(b) for b in self.sizes[1:]]
        self._cache = None

    @property
    def in_dim(self):
        return self.sizes[0]

    @property
    def out_dim(self):
        return self.sizes[-1]

    def params(self):
        out = []
        for i in range(len(self.W)):
            out.append(self.W[i])
            out.append(self.b[i])
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input dim {x.shape[1]} != expected {self.in_dim}")
        acts = [x]
        h = x
        n = len(self.W)
        for i in range(n):
            z = h @ self.W[i] + self.b[i]
            if i < n - 1:
                h = relu(z)
            elif self.output == "sigmoid":
                h = sigmoid(z)
            else:
                h = z
            acts.append(h)
        self._cache = acts
        if not np.isfinite(h).all():
            raise NumericsError("non-finite network output")
        return h

    def backward(self, grad_out: np.ndarray):
        """Gradients of sum(grad_out * output) w.r.t. params, using the
        activations cached by the last forward.  Returns a list aligned with
        params()."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        acts = self._cache
        n = len(self.W)
        g = np.asarray(grad_out, dtype=np.float64)
        if self.output == "sigmoid":
            y = acts[-1]
            g = g * y * (1.0 - y)
        grads = [None] * (2 * n)
        for i in range(n - 1, -1, -1):
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ self.W[i].T
                g = g * (acts[i] > 0)
        return grads


class SharedTrunkNet:
    """Relu trunk with two heads: a linear Q head over sub-goals and a
    logistic termination head.  Both heads backprop into the trunk."""

    def __init__(self, in_dim, hidden, n_out, rng):
        if not hidden:
            raise ValueError("shared-trunk net needs at least one hidden layer")
        self.sizes = [int(in_dim)] + [int(h) for h in hidden]
        self.n_out = int(n_out)
        self.W = [
            _he_init(a, b, rng) for a, b in zip(self.sizes[:-1], self.sizes[1:])
        ]
        self.b = [np.zeros(b) for b in self.sizes[1:]]
        self.qW = _he_init(self.sizes[-1], self.n_out, rng)
        self.qb = np.zeros(self.n_out)
        self.tW = _he_init(self.sizes[-1], self.n_out, rng)
        self.tb = np.zeros(self.n_out)
        self._cache = None

    @property
    def in_dim(self):
        return self.sizes[0]

    @property
    def out_dim(self):
        return self.n_out

    def params(self):
        out = []
        for i in range(len(self.W)):
            out.append(self.W[i])
            out.append(self.b[i])
        out.extend([self.qW, self.qb, self.tW, self.tb])
        return out

    def _trunk(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input dim {x.shape[1]} != expected {self.in_dim}")
        acts = [x]
        h = x
        for W, b in zip(self.W, self.b):
            h = relu(h @ W + b)
            acts.append(h)
        self._cache = acts
        return h

    def q_values(self, x) -> np.ndarray:
        h = self._trunk(x)
        return h @ self.qW + self.qb

    def term_probs(self, x) -> np.ndarray:
        h = self._trunk(x)
        return sigmoid(h @ self.tW + self.tb)

    def forward_both(self, x):
        h = self._trunk(x)
        return h @ self.qW + self.qb, sigmoid(h @ self.tW + self.tb)

    def _trunk_backward(self, g_hidden):
        acts = self._cache
        grads = []
        g = g_hidden
        n = len(self.W)
        tg = [None] * (2 * n)
        for i in range(n - 1, -1, -1):
            g = g * (acts[i + 1] > 0)
            tg[2 * i] = acts[i].T @ g
            tg[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ self.W[i].T
        grads.extend(tg)
        return grads

    def q_backward(self, grad_q):
        """Param grads for sum(grad_q * q_values): trunk + q head; term head
        grads are zero."""
        h = self._cache[-1]
        trunk = self._trunk_backward(np.asarray(grad_q) @ self.qW.T)
        return trunk + [h.T @ grad_q, np.asarray(grad_q).sum(axis=0),
                        np.zeros_like(self.tW), np.zeros_like(self.tb)]

    def term_backward(self, grad_t, term_out):
        """Param grads for sum(grad_t * term_probs): trunk + term head; the
        q head grads are zero."""
        h = self._cache[-1]
        gz = np.asarray(grad_t) * term_out * (1.0 - term_out)
        trunk = self._trunk_backward(gz @ self.tW.T)
        return trunk + [np.zeros_like(self.qW), np.zeros_like(self.qb),
                        h.T @ gz, gz.sum(axis=0)]


# ----- optimizers -----------------------------------------------------------


class Sgd:
    def __init__(self, lr=1e-3):
        self.lr = float(lr)

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g

    def export(self, params):
        return [], [], []

    def rebind(self, params, m_list, v_list, t_list):
        pass


class Adam:
    """Adaptive-moment gradient descent with per-parameter step counters,
    so updates that touch only a subset of parameters stay unbiased."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}
        self._t: dict[int, int] = {}

    def step(self, params, grads):
        for p, g in zip(params, grads):
            key = id(p)
            if key not in self._m:
                self._m[key] = np.zeros_like(p)
                self._v[key] = np.zeros_like(p)
                self._t[key] = 0
            self._t[key] += 1
            t = self._t[key]
            m = self._m[key]
            v = self._v[key]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            mhat = m / (1 - self.beta1**t)
            vhat = v / (1 - self.beta2**t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def export(self, params):
        """Moment state aligned with the given param list, for checkpoints."""
        m, v, t = [], [], []
        for p in params:
            key = id(p)
            m.append(self._m.get(key, np.zeros_like(p)).copy())
            v.append(self._v.get(key, np.zeros_like(p)).copy())
            t.append(self._t.get(key, 0))
        return m, v, t

    def rebind(self, params, m_list, v_list, t_list):
        """Restore moment state against a freshly constructed param list (in
        the same order as at save time)."""
        self._m, self._v, self._t = {}, {}, {}
        for p, m, v, t in zip(params, m_list, v_list, t_list):
            self._m[id(p)] = m.copy()
            self._v[id(p)] = v.copy()
            self._t[id(p)] = int(t)


def make_optimizer(kind: str, lr: float):
    if kind == "adam":
        return Adam(lr=lr)
    if kind == "sgd":
        return Sgd(lr=lr)
    raise ValueError(f"unknown optimizer {kind!r}")


# ----- training primitives --------------------------------------------------


def _check_finite(net):
    for p in net.params():
        if not np.isfinite(p).all():
            raise NumericsError(
                f"non-finite parameters after update in net with sizes {net.sizes}"
            )


def train_step(net: Mlp, optimizer, inputs, indices, targets) -> float:
    """One gradient step on mean squared error between net(inputs)[indices]
    and targets.  Only the indexed heads' errors propagate.  Returns the
    pre-step loss."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    indices = np.asarray(indices, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.isfinite(targets).all():
        raise NumericsError(f"non-finite regression targets: {targets}")
    out = net.forward(inputs)
    n = inputs.shape[0]
    rows = np.arange(n)
    err = out[rows, indices] - targets
    loss = float(np.mean(err**2))
    grad_out = np.zeros_like(out)
    grad_out[rows, indices] = 2.0 * err / n
    grads = net.backward(grad_out)
    optimizer.step(net.params(), grads)
    _check_finite(net)
    return loss


def train_q_step(net: SharedTrunkNet, optimizer, inputs, indices, targets) -> float:
    """Same selected-head MSE step for the shared-trunk net's Q head."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    indices = np.asarray(indices, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.isfinite(targets).all():
        raise NumericsError(f"non-finite regression targets: {targets}")
    out = net.q_values(inputs)
    n = inputs.shape[0]
    rows = np.arange(n)
    err = out[rows, indices] - targets
    loss = float(np.mean(err**2))
    grad_q = np.zeros_like(out)
    grad_q[rows, indices] = 2.0 * err / n
    grads = net.q_backward(grad_q)
    optimizer.step(net.params(), grads)
    _check_finite(net)
    return loss


def train_term_step(net: SharedTrunkNet, optimizer, inputs, indices, advantages):
    """Advantage-weighted termination step: descend mean(term[idx] * adv).
    Positive advantage pushes the termination probability down, negative
    pushes it up.  The advantage is a constant (no gradient through it)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    indices = np.asarray(indices, dtype=np.int64)
    advantages = np.asarray(advantages, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.isfinite(advantages).all():
        raise NumericsError("non-finite advantages")
    term = net.term_probs(inputs)
    n = inputs.shape[0]
    rows = np.arange(n)
    grad_t = np.zeros_like(term)
    grad_t[rows, indices] = advantages / n
    grads = net.term_backward(grad_t, term)
    optimizer.step(net.params(), grads)
    _check_finite(net)


def sync_target(online, target) -> None:
    """Bitwise copy of online parameters into the target twin."""
    po, pt = online.params(), target.params()
    if len(po) != len(pt) or any(a.shape != b.shape for a, b in zip(po, pt)):
        raise ValueError("architecture mismatch between online and target nets")
    for a, b in zip(po, pt):
        b[...] = a


def clone_net(net):
    if isinstance(net, Mlp):
        twin = Mlp.__new__(Mlp)
        twin.sizes = list(net.sizes)
        twin.output = net.output
        twin.W = [w.copy() for w in net.W]
        twin.b = [b.copy() for b in net.b]
        twin._cache = None
        return twin
    if isinstance(net, SharedTrunkNet):
        twin = SharedTrunkNet.__new__(SharedTrunkNet)
        twin.sizes = list(net.sizes)
        twin.n_out = net.n_out
        twin.W = [w.copy() for w in net.W]
        twin.b = [b.copy() for b in net.b]
        twin.qW = net.qW.copy()
        twin.qb = net.qb.copy()
        twin.tW = net.tW.copy()
        twin.tb = net.tb.copy()
        twin._cache = None
        return twin
    raise TypeError(f"cannot clone {type(net)!r}")


# ----- replay ---------------------------------------------------------------


class ReplayBuffer:
    """FIFO ring buffer with uniform with-replacement sampling."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._storage: list = []
        self._cursor = 0

    def __len__(self):
        return len(self._storage)

    def push(self, item) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(item)
        else:
            self._storage[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, n: int, rng: np.random.Generator) -> list:
        if not self._storage:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._storage), size=n)
        return [self._storage[i] for i in idx]

    def items(self):
        return list(self._storage)


# ----- schedules ------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Linear interpolation from start to end over `horizon` episodes,
    clamped outside [0, horizon]."""

    start: float
    end: float
    horizon: int

    def value(self, episode: int) -> float:
        if episode <= 0 or self.horizon <= 0:
            return self.start if episode <= 0 else self.end
        if episode >= self.horizon:
            return self.end
        frac = episode / self.horizon
        return self.start + (self.end - self.start) * frac


@dataclass(frozen=True)
class ConstantSchedule:
    level: float

    def value(self, episode: int) -> float:
        return self.level
