"""Dense network kernel: float64 ReLU MLPs with hand-written backprop and Adam.

Everything the learners need lives here: forward/backward for small MLPs,
Adam with bias correction, numerically safe softmax and entropy, categorical
sampling, and a versioned checkpoint format. There is no autograd framework
behind any of it, so every gradient is checkable against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = "HAPCKPT1"


# ---------------------------------------------------------------------------
# softmax family
# ---------------------------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis (shift by the row max)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def entropy(dist) -> float:
    """Shannon entropy in nats; 0*log(0) counts as 0."""
    p = dist.probs if isinstance(dist, Categorical) else np.asarray(dist, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def entropy_grad_wrt_logits(probs: np.ndarray) -> np.ndarray:
    """d H(softmax(z)) / dz given p = softmax(z); zero exactly at uniform."""
    p = np.asarray(probs, dtype=np.float64)
    h = entropy(p)
    out = np.zeros_like(p)
    nz = p > 0.0
    out[nz] = -p[nz] * (np.log(p[nz]) + h)
    return out


@dataclass
class Categorical:
    """A validated probability vector over task or action indices."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("Categorical needs a non-empty 1-D probability vector")
        if (p < -1e-12).any():
            raise ValueError(f"negative probability: min={p.min()}")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.probs = np.clip(p, 0.0, None)

    @property
    def n(self) -> int:
        return self.probs.size


def sample(dist, rng: np.random.Generator) -> int:
    """Draw one index by inverse CDF; zero-probability entries are never hit."""
    p = dist.probs if isinstance(dist, Categorical) else np.asarray(dist, dtype=np.float64)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0  # guard float drift at the top end
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def one_hot(index: int, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.float64)
    out[index] = 1.0
    return out


# ---------------------------------------------------------------------------
# MLP with explicit backward
# ---------------------------------------------------------------------------

class Mlp:
    """Fully connected network: ReLU hidden layers, linear output, float64.

    `layer_sizes` includes input and output, e.g. (3, 4, 2). Hidden weights
    use He initialization; the output layer is scaled down so freshly built
    policies start near uniform. Pass rng=None for an all-zero network.
    """

    def __init__(self, layer_sizes, rng: np.random.Generator | None = None,
                 final_scale: float = 0.01):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = sizes
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                scale = np.sqrt(2.0 / fan_in) if i < last else final_scale / np.sqrt(fan_in)
                w = rng.normal(0.0, scale, size=(fan_in, fan_out))
            self.weights.append(np.asarray(w, dtype=np.float64))
            self.biases.append(np.zeros(fan_out, dtype=np.float64))

    # -- forward / backward ------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cache(x)
        return out

    def forward_cache(self, x: np.ndarray):
        """Returns (output, cache); accepts a single vector or an (n, d) batch."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        acts = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        out = acts[-1][0] if squeeze else acts[-1]
        return out, (acts, squeeze)

    def backward(self, cache, output_grad: np.ndarray):
        """Grads of sum(output * output_grad) w.r.t. params and input.

        Returns (param_grads, input_grad) where param_grads matches the
        layout of `params`. Batched caches get their grads summed.
        """
        acts, squeeze = cache
        g = np.asarray(output_grad, dtype=np.float64)
        if squeeze:
            g = g[None, :]
        grads: list[np.ndarray] = [np.empty(0)] * (2 * len(self.weights))
        for i in reversed(range(len(self.weights))):
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (acts[i] > 0.0)  # ReLU subgradient, 0 at the kink
        return grads, (g[0] if squeeze else g)

    # -- parameter plumbing ------------------------------------------------

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def load_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.param_count:
            raise ValueError(f"expected {self.param_count} params, got {vec.size}")
        at = 0
        for p in self.params:
            p[...] = vec[at : at + p.size].reshape(p.shape)
            at += p.size

    def copy(self) -> "Mlp":
        dup = Mlp(self.layer_sizes, rng=None)
        dup.load_flat(self.flat())
        return dup


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Per-parameter-list Adam moments; created lazily on the first step."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default=None, repr=False)
    v: list = field(default=None, repr=False)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> list[np.ndarray]:
    """One bias-corrected Adam update, in place on `params`."""
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def global_norm(grads: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.square(g).sum()) for g in grads)))


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scales grads in place to the given global norm; returns the pre-clip norm."""
    norm = global_norm(grads)
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------
# Layout (documented in docs/formats.md): an ASCII header terminated by an
# "end" line, then every net's params as raw little-endian float64 in header
# order. Params within one net follow [W0, b0, W1, b1, ...] ravel order.

def save_checkpoint(path, nets: dict[str, Mlp], seed: int) -> None:
    names = list(nets)
    lines = [CHECKPOINT_MAGIC, "nets " + " ".join(names)]
    total = 0
    for name in names:
        if any(ch.isspace() for ch in name):
            raise ValueError(f"net name with whitespace: {name!r}")
        lines.append(f"net {name} " + " ".join(str(s) for s in nets[name].layer_sizes))
        total += nets[name].param_count
    lines.append(f"seed {int(seed)}")
    lines.append(f"params {total}")
    lines.append("end")
    blob = (np.concatenate([nets[n].flat() for n in names]) if total
            else np.zeros(0, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(blob.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, Mlp], int]:
    with open(path, "rb") as fh:
        raw = fh.read()
    header, sep, blob = raw.partition(b"\nend\n")
    if not sep:
        raise ValueError("checkpoint has no header terminator")
    lines = header.decode("ascii").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic: {lines[:1]!r}")
    fields = dict(line.split(" ", 1) for line in lines[1:])
    names = fields["nets"].split()
    seed = int(fields["seed"])
    declared = int(fields["params"])
    sizes = {}
    for line in lines[1:]:
        if line.startswith("net "):
            _, name, rest = line.split(" ", 2)
            sizes[name] = [int(s) for s in rest.split()]
    vec = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    if vec.size != declared:
        raise ValueError(f"checkpoint blob holds {vec.size} params, header says {declared}")
    nets: dict[str, Mlp] = {}
    at = 0
    for name in names:
        net = Mlp(sizes[name], rng=None)
        net.load_flat(vec[at : at + net.param_count])
        at += net.param_count
        nets[name] = net
    return nets, seed
