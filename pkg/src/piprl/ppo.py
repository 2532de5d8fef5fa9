"""PPO over the 36 waypoint angles with restriction-guided sampling.

The actor and critic are small tanh MLPs written directly in numpy so the
gradients are explicit (and checked against finite differences in the test
suite). Costs are turned into rewards by negation inside this module;
everything outside it talks in costs.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .angles import PI_SET, angle_index

N_ANGLES = len(PI_SET)
CHECKPOINT_VERSION = 1
OFFSET_DISTANCE = 2.5


class DimensionMismatch(ValueError):
    pass


class EmptyRestriction(ValueError):
    pass


class NonFiniteLoss(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class PPOConfig:
    gamma: float = 0.99
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    lr: float = 3e-4
    batch_size: int = 64
    epsilon: float = 0.1  # uniform mixing rate during sampling
    gae_lambda: float = 0.95
    epochs: int = 4
    rollout: int = 128
    horizon: int = 500
    max_grad_norm: float = 0.5
    hidden: int = 64
    cost_scale: float = 1.0  # costs are multiplied by this before discounting
    ratio_on_sampled: bool = False  # use the originally sampled angle in the ratio

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must be in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "PPOConfig":
        names = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k in names:
                kw[k] = v
        return cls(**kw)


# -- network -----------------------------------------------------------------

_LAYERS = ("W1", "b1", "W2", "b2", "W3", "b3")


def _init_mlp(rng, sizes, prefix, zero_head=True):
    params = {}
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
        last = i == len(sizes) - 1
        if last and zero_head:
            w = np.zeros((n_in, n_out))
        else:
            # orthogonal init, gain sqrt(2) for hidden layers
            a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            w = (q if n_in >= n_out else q.T)[:n_in, :n_out] * math.sqrt(2.0)
        params[f"{prefix}W{i}"] = w
        params[f"{prefix}b{i}"] = np.zeros(n_out)
    return params


class PolicyNet:
    """Actor (input -> 64 -> 64 -> 36 logits) and critic (input -> 64 -> 64 -> 1)."""

    def __init__(self, input_dim: int, hidden: int = 64, seed: int | None = 0,
                 rng: np.random.Generator | None = None, zero_heads: bool = True):
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.input_dim = int(input_dim)
        self.hidden = int(hidden)
        self.params = {}
        self.params.update(_init_mlp(rng, (input_dim, hidden, hidden, N_ANGLES), "a", zero_heads))
        self.params.update(_init_mlp(rng, (input_dim, hidden, hidden, 1), "v", zero_heads))
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_t = 0

    @property
    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def copy(self) -> "PolicyNet":
        out = PolicyNet.__new__(PolicyNet)
        out.input_dim, out.hidden = self.input_dim, self.hidden
        out.params = {k: v.copy() for k, v in self.params.items()}
        out.adam_m = {k: v.copy() for k, v in self.adam_m.items()}
        out.adam_v = {k: v.copy() for k, v in self.adam_v.items()}
        out.adam_t = self.adam_t
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in sorted(self.params)])


def _mlp(params, prefix, x):
    h1 = np.tanh(x @ params[prefix + "W1"] + params[prefix + "b1"])
    h2 = np.tanh(h1 @ params[prefix + "W2"] + params[prefix + "b2"])
    out = h2 @ params[prefix + "W3"] + params[prefix + "b3"]
    return out, (x, h1, h2)


def _mlp_backward(params, prefix, cache, d_out, grads):
    x, h1, h2 = cache
    grads[prefix + "W3"] = h2.T @ d_out
    grads[prefix + "b3"] = d_out.sum(axis=0)
    d_h2 = (d_out @ params[prefix + "W3"].T) * (1.0 - h2 ** 2)
    grads[prefix + "W2"] = h1.T @ d_h2
    grads[prefix + "b2"] = d_h2.sum(axis=0)
    d_h1 = (d_h2 @ params[prefix + "W2"].T) * (1.0 - h1 ** 2)
    grads[prefix + "W1"] = x.T @ d_h1
    grads[prefix + "b1"] = d_h1.sum(axis=0)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(net: PolicyNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != net.input_dim:
        raise DimensionMismatch(f"expected input of size {net.input_dim}, got {x.shape[1]}")
    return x, single


def forward(net: PolicyNet, x):
    """Distribution over the angle set and state value."""
    xb, single = _as_batch(net, x)
    logits, _ = _mlp(net.params, "a", xb)
    value, _ = _mlp(net.params, "v", xb)
    probs, value = _softmax(logits), value[:, 0]
    if single:
        return probs[0], float(value[0])
    return probs, value


def mixture(probs, epsilon: float):
    return (1.0 - epsilon) * np.asarray(probs) + epsilon / N_ANGLES


# -- acting ------------------------------------------------------------------

@dataclass
class Transition:
    input: np.ndarray
    sampled: int  # index into PI_SET
    executed: int
    compliant: bool
    weight: float
    logp: float  # log behaviour probability of the executed angle
    logp_sampled: float
    value: float = 0.0
    cost: float = 0.0
    corrected_cost: float = 0.0
    next_value: float = 0.0
    terminal: bool = False  # true end of the task (no bootstrap)
    end: bool = False  # last transition of its trajectory segment
    reason: str = ""

    @property
    def executed_angle(self) -> float:
        return PI_SET[self.executed]

    @property
    def sampled_angle(self) -> float:
        return PI_SET[self.sampled]


def _restriction_indices(restriction) -> np.ndarray:
    idx = sorted({angle_index(a) for a in restriction})
    if not idx:
        raise EmptyRestriction("restriction set is empty")
    return np.array(idx, dtype=np.int64)


def select_action(net: PolicyNet, x, restriction, rng: np.random.Generator,
                  epsilon: float = 0.1) -> Transition:
    """Sample an angle; substitute a uniform compliant one if the sample is not allowed.

    The weight is 1 for compliant samples and |C| * pi(executed) otherwise.
    Two uniforms are always drawn so the stream does not depend on the branch.
    """
    allowed = _restriction_indices(restriction)
    probs, value = forward(net, x)
    mix = mixture(probs, epsilon)
    u, v = rng.random(2)
    sampled = int(min(np.searchsorted(np.cumsum(mix), u, side="right"), N_ANGLES - 1))
    if sampled in allowed:
        executed, weight, compliant = sampled, 1.0, True
    else:
        executed = int(allowed[min(int(v * len(allowed)), len(allowed) - 1)])
        weight = float(len(allowed) * probs[executed])
        compliant = False
    return Transition(
        input=np.asarray(x, dtype=float), sampled=sampled, executed=executed,
        compliant=compliant, weight=weight, logp=float(np.log(mix[executed])),
        logp_sampled=float(np.log(mix[sampled])), value=value)


def expected_substituted_cost(probs, restriction, costs) -> float:
    """Exact E[weight * c(executed) | substitution] by enumerating the uniform draw."""
    allowed = _restriction_indices(restriction)
    probs, costs = np.asarray(probs, dtype=float), np.asarray(costs, dtype=float)
    n = len(allowed)
    return float(sum((1.0 / n) * (n * probs[a]) * costs[a] for a in allowed))


def waypoint_and_cost(pose, angle: float, tx, extent: float | None = None):
    """Waypoint D meters along ``angle`` from the pose and its squared distance to the target."""
    rad = math.radians(angle)
    x = pose[0] + OFFSET_DISTANCE * math.cos(rad)
    y = pose[1] + OFFSET_DISTANCE * math.sin(rad)
    if extent is not None:
        eps = 1e-6
        x = min(max(x, eps), extent - eps)
        y = min(max(y, eps), extent - eps)
    return (x, y), float((x - tx[0]) ** 2 + (y - tx[1]) ** 2)


def check_termination(ell, last_ell) -> bool:
    if ell is None or last_ell is None:
        return False
    return ell > last_ell


# -- advantages --------------------------------------------------------------

@dataclass
class RolloutBuffer:
    transitions: list = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def add(self, t: Transition) -> None:
        self.transitions.append(t)

    def __len__(self):
        return len(self.transitions)

    def clear(self) -> None:
        self.transitions.clear()
        self.advantages = self.returns = None


def _gae(rewards, values, next_values, terminal, end, gamma, lam):
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 0.0 if terminal[t] else 1.0
        delta = rewards[t] + gamma * next_values[t] * nonterminal - values[t]
        if end[t] or t == n - 1:
            running = 0.0
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv


def compute_advantages(buffer: RolloutBuffer, config: PPOConfig = PPOConfig(),
                       normalize: bool = True) -> RolloutBuffer:
    """Critic returns from raw costs; actor advantages from corrected costs."""
    tr = buffer.transitions
    values = np.array([t.value for t in tr], dtype=float)
    next_values = np.array([t.next_value for t in tr], dtype=float)
    terminal = np.array([t.terminal for t in tr], dtype=bool)
    end = np.array([t.end for t in tr], dtype=bool)
    raw = -config.cost_scale * np.array([t.cost for t in tr], dtype=float)
    corrected = -config.cost_scale * np.array([t.corrected_cost for t in tr], dtype=float)
    g, lam = config.gamma, config.gae_lambda
    buffer.returns = _gae(raw, values, next_values, terminal, end, g, lam) + values
    adv = _gae(corrected, values, next_values, terminal, end, g, lam)
    if normalize and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    buffer.advantages = adv
    return buffer


# -- loss and update ---------------------------------------------------------

def loss_and_grad(params: dict, x, actions, logp_old, advantages, returns, config: PPOConfig,
                  want_grad: bool = True):
    """Clipped surrogate + value loss - entropy bonus, and its exact gradient."""
    n = len(actions)
    eps = config.epsilon
    logits, a_cache = _mlp(params, "a", x)
    v_out, v_cache = _mlp(params, "v", x)
    probs = _softmax(logits)
    rows = np.arange(n)
    m = (1.0 - eps) * probs[rows, actions] + eps / N_ANGLES
    old = np.exp(logp_old)
    ratio = m / old
    clipped = np.clip(ratio, 1.0 - config.clip, 1.0 + config.clip)
    unclipped_term, clipped_term = ratio * advantages, clipped * advantages
    use_unclipped = unclipped_term <= clipped_term
    policy_loss = -np.mean(np.where(use_unclipped, unclipped_term, clipped_term))
    values = v_out[:, 0]
    value_loss = np.mean((values - returns) ** 2)
    logp = np.log(probs + 1e-300)
    entropy = -(probs * logp).sum(axis=1)
    total = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy.mean()
    report = {"loss": float(total), "policy_loss": float(policy_loss), "value_loss": float(value_loss),
              "entropy": float(entropy.mean()),
              "clip_frac": float(np.mean(np.abs(ratio - 1.0) > config.clip))}
    if not want_grad:
        return total, None, report

    # d total / d ratio
    d_ratio = np.where(use_unclipped, -advantages, 0.0) / n
    # d ratio / d logits: (1 - eps) / old * p_a (1[a=j] - p_j)
    pa = probs[rows, actions]
    coef = d_ratio * (1.0 - eps) / old * pa
    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    d_logits = coef[:, None] * (onehot - probs)
    # entropy: dH/dz_j = -p_j (log p_j + H)
    d_logits += (config.entropy_coef / n) * probs * (logp + entropy[:, None])
    d_values = (config.value_coef * 2.0 / n) * (values - returns)
    grads: dict = {}
    _mlp_backward(params, "a", a_cache, d_logits, grads)
    _mlp_backward(params, "v", v_cache, d_values[:, None], grads)
    return total, grads, report


def _adam_step(net: PolicyNet, grads: dict, lr: float, b1=0.9, b2=0.999, eps=1e-8):
    net.adam_t += 1
    t = net.adam_t
    for k, g in grads.items():
        net.adam_m[k] = b1 * net.adam_m[k] + (1 - b1) * g
        net.adam_v[k] = b2 * net.adam_v[k] + (1 - b2) * g * g
        mhat = net.adam_m[k] / (1 - b1 ** t)
        vhat = net.adam_v[k] / (1 - b2 ** t)
        net.params[k] = net.params[k] - lr * mhat / (np.sqrt(vhat) + eps)


def ppo_update(net: PolicyNet, buffer: RolloutBuffer, config: PPOConfig,
               rng: np.random.Generator) -> dict:
    """Several epochs of minibatch Adam steps. On a non-finite loss the net is restored."""
    if buffer.advantages is None:
        compute_advantages(buffer, config)
    tr = buffer.transitions
    if len(tr) == 0:
        return {"updates": 0}
    x = np.stack([t.input for t in tr])
    if config.ratio_on_sampled:
        actions = np.array([t.sampled for t in tr], dtype=np.int64)
        logp_old = np.array([t.logp_sampled for t in tr])
    else:
        actions = np.array([t.executed for t in tr], dtype=np.int64)
        logp_old = np.array([t.logp for t in tr])
    adv, ret = buffer.advantages, buffer.returns
    snapshot = net.copy()
    reports = []
    n = len(tr)
    bs = min(config.batch_size, n)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            if len(idx) < bs and start > 0:
                continue
            loss, grads, report = loss_and_grad(net.params, x[idx], actions[idx], logp_old[idx],
                                                adv[idx], ret[idx], config)
            if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                _restore(net, snapshot)
                raise NonFiniteLoss(f"non-finite loss {loss}")
            norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if config.max_grad_norm and norm > config.max_grad_norm:
                scale = config.max_grad_norm / (norm + 1e-12)
                grads = {k: g * scale for k, g in grads.items()}
            _adam_step(net, grads, config.lr)
            reports.append(report)
    if not all(np.isfinite(v).all() for v in net.params.values()):
        _restore(net, snapshot)
        raise NonFiniteLoss("parameters became non-finite")
    out = {k: float(np.mean([r[k] for r in reports])) for k in reports[0]}
    out["updates"] = len(reports)
    return out


def _restore(net: PolicyNet, snapshot: PolicyNet) -> None:
    net.params, net.adam_m, net.adam_v, net.adam_t = (
        snapshot.params, snapshot.adam_m, snapshot.adam_v, snapshot.adam_t)


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(path, net: PolicyNet, config: PPOConfig, rng: np.random.Generator | None = None,
                    extra: dict | None = None) -> Path:
    """npz archive: parameters, Adam moments, config and rng state as JSON."""
    path = Path(path)
    arrays = {f"p_{k}": v for k, v in net.params.items()}
    arrays.update({f"m_{k}": v for k, v in net.adam_m.items()})
    arrays.update({f"v_{k}": v for k, v in net.adam_v.items()})
    meta = {
        "version": CHECKPOINT_VERSION,
        "input_dim": net.input_dim,
        "hidden": net.hidden,
        "adam_t": net.adam_t,
        "config": asdict(config),
        "rng": None if rng is None else rng.bit_generator.state,
        "extra": extra or {},
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    """Returns (net, config, rng or None, extra)."""
    try:
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
            net = PolicyNet.__new__(PolicyNet)
            net.input_dim, net.hidden, net.adam_t = meta["input_dim"], meta["hidden"], meta["adam_t"]
            net.params = {k[2:]: data[k].copy() for k in data.files if k.startswith("p_")}
            net.adam_m = {k[2:]: data[k].copy() for k in data.files if k.startswith("m_")}
            net.adam_v = {k[2:]: data[k].copy() for k in data.files if k.startswith("v_")}
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    config = PPOConfig.from_dict(meta["config"])
    rng = None
    if meta["rng"] is not None:
        rng = np.random.default_rng()
        rng.bit_generator.state = meta["rng"]
    return net, config, rng, meta.get("extra", {})
