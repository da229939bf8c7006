"""Small dense networks with hand-written backpropagation, Adam and a binary checkpoint format."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError

ACTIVATIONS = ("identity", "relu", "tanh", "sigmoid")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise StructuralError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise StructuralError("layer weight/bias shapes disagree")


@dataclass
class Mlp:
    layers: list[Layer]
    version: int = 0  # bumped on every in-place parameter change

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if b.W.shape[1] != a.W.shape[0]:
                raise StructuralError("consecutive layer sizes do not chain")

    @classmethod
    def build(cls, sizes, hidden="relu", head="identity", rng=None) -> "Mlp":
        """Uniform(+-1/sqrt(fan_in)) initialisation."""
        rng = np.random.default_rng(0) if rng is None else rng
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            lim = 1.0 / np.sqrt(n_in)
            act = head if i == len(sizes) - 2 else hidden
            layers.append(Layer(rng.uniform(-lim, lim, (n_out, n_in)), rng.uniform(-lim, lim, n_out), act))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.shape[0]

    def params(self) -> list[np.ndarray]:
        return [p for L in self.layers for p in (L.W, L.b)]

    def copy(self) -> "Mlp":
        return Mlp([Layer(L.W.copy(), L.b.copy(), L.activation) for L in self.layers])

    def architecture(self):
        return tuple((L.W.shape, L.activation) for L in self.layers)

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)[0]


@dataclass
class Cache:
    version: int
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]
    single: bool


def forward(net: Mlp, x) -> tuple[np.ndarray, Cache]:
    """Works on a single vector or a (batch, in_dim) array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.in_dim:
        raise StructuralError(f"input has {h.shape[1]} features, network expects {net.in_dim}")
    inputs, pre, post = [], [], []
    for L in net.layers:
        inputs.append(h)
        z = h @ L.W.T + L.b
        h = _act(L.activation, z)
        pre.append(z)
        post.append(h)
    return (h[0] if single else h), Cache(net.version, inputs, pre, post, single)


@dataclass
class Grads:
    params: list[np.ndarray]  # same order as Mlp.params()
    x: np.ndarray  # gradient with respect to the input


def backward(net: Mlp, cache: Cache, grad_out) -> Grads:
    """Gradients of sum(grad_out * output) with respect to parameters and input."""
    if cache.version != net.version or len(cache.inputs) != len(net.layers):
        raise StructuralError("cache does not belong to the current parameters")
    g = np.asarray(grad_out, dtype=float)
    g = g[None, :] if cache.single else g
    out = []
    for i in range(len(net.layers) - 1, -1, -1):
        L = net.layers[i]
        g = g * _act_grad(L.activation, cache.pre[i], cache.post[i])
        out.append(g.sum(axis=0))
        out.append(g.T @ cache.inputs[i])
        g = g @ L.W
    out.reverse()
    return Grads(out, g[0] if cache.single else g)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 1e-3, **kw) -> "AdamState":
        return cls(lr, m=[np.zeros_like(p) for p in net.params()],
                   v=[np.zeros_like(p) for p in net.params()], **kw)


def adam_step(net: Mlp, grads: list[np.ndarray], st: AdamState) -> Mlp:
    """In-place bias-corrected Adam descent step on ``net``; returns it."""
    params = net.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise StructuralError("gradient shapes do not match the parameters")
    if not st.m:
        st.m = [np.zeros_like(p) for p in params]
        st.v = [np.zeros_like(p) for p in params]
    st.step += 1
    c1 = 1.0 - st.beta1 ** st.step
    c2 = 1.0 - st.beta2 ** st.step
    for p, g, m, v in zip(params, grads, st.m, st.v):
        m *= st.beta1
        m += (1.0 - st.beta1) * g
        v *= st.beta2
        v += (1.0 - st.beta2) * g * g
        p -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
    net.version += 1
    return net


def blend(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """target <- tau * online + (1 - tau) * target, in place."""
    if target.architecture() != online.architecture():
        raise StructuralError("target and online networks differ in architecture")
    for pt, po in zip(target.params(), online.params()):
        if tau == 1.0:
            pt[...] = po
        else:
            pt *= 1.0 - tau
            pt += tau * po
    target.version += 1
    return target


# -- checkpoints ----------------------------------------------------------
#
# File layout, little endian:
#   magic b"HRCK", u16 format version, u32 record count, then per record
#   u16 name length, utf-8 name, u8 kind (0 = network, 1 = adam state), payload.
# network payload: u32 layer count; per layer u32 out, u32 in, u8 activation
#   index, out*in f64 weights (row major), out f64 biases.
# adam payload: f64 lr, beta1, beta2, eps, u64 step, u32 tensor count, then per
#   tensor u32 size and size f64 values for m, followed by the same for v.

MAGIC = b"HRCK"
FORMAT_VERSION = 1


def _pack_net(net: Mlp) -> bytes:
    out = [struct.pack("<I", len(net.layers))]
    for L in net.layers:
        o, i = L.W.shape
        out.append(struct.pack("<IIB", o, i, ACTIVATIONS.index(L.activation)))
        out.append(np.ascontiguousarray(L.W, dtype="<f8").tobytes())
        out.append(np.ascontiguousarray(L.b, dtype="<f8").tobytes())
    return b"".join(out)


def _pack_adam(st: AdamState) -> bytes:
    out = [struct.pack("<ddddQI", st.lr, st.beta1, st.beta2, st.eps, st.step, len(st.m))]
    for arrs in (st.m, st.v):
        for a in arrs:
            out.append(struct.pack("<I", a.size))
            out.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(out)


def dumps(records: dict) -> bytes:
    out = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(records))]
    for name, obj in records.items():
        key = name.encode()
        if isinstance(obj, Mlp):
            kind, body = 0, _pack_net(obj)
        elif isinstance(obj, AdamState):
            kind, body = 1, _pack_adam(obj)
        else:
            raise StructuralError(f"cannot serialize {type(obj).__name__}")
        out += [struct.pack("<H", len(key)), key, struct.pack("<B", kind), body]
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, fmt: str):
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += struct.calcsize(fmt)
        return vals

    def floats(self, n: int) -> np.ndarray:
        a = np.frombuffer(self.buf, dtype="<f8", count=n, offset=self.pos).astype(float)
        self.pos += 8 * n
        return a


def loads(buf: bytes) -> dict:
    if buf[:4] != MAGIC:
        raise StructuralError("not a checkpoint file")
    r = _Reader(buf)
    r.pos = 4
    version, count = r.take("<HI")
    if version != FORMAT_VERSION:
        raise StructuralError(f"unsupported checkpoint version {version}")
    out = {}
    for _ in range(count):
        (n,) = r.take("<H")
        name = r.buf[r.pos:r.pos + n].decode()
        r.pos += n
        (kind,) = r.take("<B")
        if kind == 0:
            (nl,) = r.take("<I")
            layers = []
            for _ in range(nl):
                o, i, a = r.take("<IIB")
                W = r.floats(o * i).reshape(o, i)
                layers.append(Layer(W, r.floats(o), ACTIVATIONS[a]))
            out[name] = Mlp(layers)
        elif kind == 1:
            lr, b1, b2, eps, step, nt = r.take("<ddddQI")
            moments = []
            for _ in range(2):
                arrs = []
                for _ in range(nt):
                    (size,) = r.take("<I")
                    arrs.append(r.floats(size))
                moments.append(arrs)
            out[name] = AdamState(lr, b1, b2, eps, step, *moments)
        else:
            raise StructuralError(f"unknown record kind {kind}")
    return out


def restore_adam_shapes(st: AdamState, net: Mlp) -> AdamState:
    """Reshape flat moment vectors loaded from disk to the network's parameter shapes."""
    st.m = [a.reshape(p.shape) for a, p in zip(st.m, net.params())]
    st.v = [a.reshape(p.shape) for a, p in zip(st.v, net.params())]
    return st
