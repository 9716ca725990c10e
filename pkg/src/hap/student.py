"""Policy-gradient students: A2C and PPO with a clipped surrogate.

Both algorithms share one actor/critic pair of small MLPs and one gradient
vocabulary.  The gradient builders are pure functions of (policy, batch) so
tests can take exact expectations over enumerable MDPs; the update functions
apply global-norm clipping and one Adam step per network.
"""

from dataclasses import dataclass, field

import numpy as np

from .envs.base import ContractError, GridEnv, Trajectory, TrajStep
from .nn import (
    AdamState,
    Mlp,
    adam_step,
    clip_global_norm,
    entropy,
    entropy_grad_wrt_logits,
    log_softmax,
    softmax,
)


@dataclass
class StudentConfig:
    algo: str = "a2c"
    gamma: float = 0.99
    actor_lr: float = 1e-3
    critic_lr: float = 3e-3
    hidden: tuple[int, ...] = (64, 64)
    entropy_coef: float = 0.01
    vf_coef: float = 0.5
    clip_eps: float = 0.1
    gae_lambda: float = 0.95
    ppo_epochs: int = 4
    grad_clip: float = 0.5
    adv_norm: bool = False
    head_scale: float = 1.0

    def __post_init__(self):
        if self.algo not in ("a2c", "ppo"):
            raise ValueError(f"unknown student algo {self.algo!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.head_scale <= 0.0:
            raise ValueError("head_scale must be > 0")


class StudentPolicy:
    """Actor and critic networks plus their optimizer states."""

    def __init__(self, obs_dim: int, n_actions: int, cfg: StudentConfig,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.n_actions = n_actions
        self.actor = Mlp((obs_dim, *cfg.hidden, n_actions), rng)
        self.critic = Mlp((obs_dim, *cfg.hidden, 1), rng)
        if cfg.head_scale != 1.0:
            # shrinking the output layer starts the policy near uniform
            self.actor.params[-2] *= cfg.head_scale
        self.actor_opt = AdamState(lr=cfg.actor_lr)
        self.critic_opt = AdamState(lr=cfg.critic_lr)

    def logits(self, enc: np.ndarray) -> np.ndarray:
        return self.actor.forward(enc)

    def value(self, enc: np.ndarray) -> float:
        return float(self.critic.forward(enc)[0])

    def act(self, enc: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
        logp = log_softmax(self.logits(enc))
        action = int(rng.choice(self.n_actions, p=np.exp(logp)))
        return action, float(logp[action])

    def greedy(self, enc: np.ndarray) -> int:
        return int(np.argmax(self.logits(enc)))


def eval_seed(base: int, k: int) -> int:
    """Held-out episode seeds are odd; training seeds are even."""
    return 2 * (base + k) + 1


def rollout(policy: StudentPolicy, env: GridEnv, task: str, seed: int,
            rng: np.random.Generator) -> Trajectory:
    """Sample one episode, caching encodings and behavior log-probs."""
    obs = env.reset(task, seed)
    steps = []
    while not env.done:
        enc = env.encode(obs)
        action, logp = policy.act(enc, rng)
        obs, reward, _ = env.step(action)
        steps.append(TrajStep(obs=None, action=action, reward=reward,
                              logp=logp, enc=enc))
    rewards = [s.reward for s in steps]
    return Trajectory(task=task, steps=steps, success=env.succeeded,
                      discounted_return=_discounted(rewards, policy.cfg.gamma))


def greedy_rollout(policy: StudentPolicy, env: GridEnv, task: str, seed: int) -> Trajectory:
    """Deterministic argmax episode used for evaluation."""
    obs = env.reset(task, seed)
    steps = []
    while not env.done:
        enc = env.encode(obs)
        action = policy.greedy(enc)
        obs, reward, _ = env.step(action)
        steps.append(TrajStep(obs=None, action=action, reward=reward, enc=enc))
    rewards = [s.reward for s in steps]
    return Trajectory(task=task, steps=steps, success=env.succeeded,
                      discounted_return=_discounted(rewards, policy.cfg.gamma))


def evaluate(policy: StudentPolicy, env: GridEnv, task: str, episodes: int,
             base: int = 0) -> tuple[float, float]:
    """Greedy success rate and mean return over held-out odd seeds."""
    if episodes < 1:
        raise ContractError("evaluate needs at least one episode")
    wins, returns = 0, []
    for k in range(episodes):
        traj = greedy_rollout(policy, env, task, eval_seed(base, k))
        wins += traj.success
        returns.append(traj.discounted_return)
    return wins / episodes, float(np.mean(returns))


def _discounted(rewards: list[float], gamma: float) -> float:
    total = 0.0
    for r in reversed(rewards):
        total = r + gamma * total
    return float(total)


def returns_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """G_t = r_t + gamma * G_{t+1}, with nothing beyond the last step."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def gae_advantages(rewards: np.ndarray, values: np.ndarray, gamma: float,
                   lam: float) -> np.ndarray:
    """Generalized advantages with the post-terminal value pinned to zero.

    At lam=1 this telescopes to returns_to_go(rewards) - values exactly,
    which is the advantage the A2C update uses.
    """
    n = len(rewards)
    adv = np.zeros(n)
    gae = 0.0
    for t in range(n - 1, -1, -1):
        next_v = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * next_v - values[t]
        gae = delta + gamma * lam * gae
        adv[t] = gae
    return adv


def _traj_slices(trajs: list[Trajectory]) -> list[tuple[int, int]]:
    bounds = np.cumsum([0] + [len(tr.steps) for tr in trajs])
    return list(zip(bounds[:-1], bounds[1:]))


def _normalize(advantages: np.ndarray) -> np.ndarray:
    """Batch-standardize advantages; a singleton batch passes through."""
    if advantages.size < 2:
        return advantages
    centered = advantages - advantages.mean()
    std = centered.std()
    return centered / std if std > 0.0 else centered


def _flatten_batch(trajs: list[Trajectory], gamma: float):
    encs = np.stack([s.enc for tr in trajs for s in tr.steps])
    actions = np.array([s.action for tr in trajs for s in tr.steps])
    targets = np.concatenate([
        returns_to_go(np.array([s.reward for s in tr.steps]), gamma)
        for tr in trajs
    ])
    return encs, actions, targets


def _policy_logit_grads(probs: np.ndarray, actions: np.ndarray,
                        advantages: np.ndarray, entropy_coef: float) -> np.ndarray:
    """Per-step surrogate-loss gradient w.r.t. logits, already averaged."""
    m = len(actions)
    dlogits = probs.copy()
    dlogits[np.arange(m), actions] -= 1.0
    dlogits *= advantages[:, None] / m
    if entropy_coef:
        for i in range(m):
            dlogits[i] -= (entropy_coef / m) * entropy_grad_wrt_logits(probs[i])
    return dlogits


def _critic_grads(policy: StudentPolicy, encs: np.ndarray, targets: np.ndarray,
                  vf_coef: float):
    values, cache = policy.critic.forward_cache(encs)
    dv = 2.0 * vf_coef * (values[:, 0] - targets) / len(targets)
    grads, _ = policy.critic.backward(cache, dv[:, None])
    return grads, values[:, 0]


def a2c_gradients(policy: StudentPolicy, trajs: list[Trajectory],
                  cfg: StudentConfig):
    """Loss gradients for one advantage-actor-critic step on a batch.

    Advantages come from the generalized estimator; gae_lambda=1.0
    recovers plain discounted-return-minus-value advantages.
    """
    encs, actions, targets = _flatten_batch(trajs, cfg.gamma)
    critic_grads, values = _critic_grads(policy, encs, targets, cfg.vf_coef)
    advantages = np.concatenate([
        gae_advantages(tr.rewards(), values[lo:hi], cfg.gamma, cfg.gae_lambda)
        for tr, (lo, hi) in zip(trajs, _traj_slices(trajs))
    ])
    if cfg.adv_norm:
        advantages = _normalize(advantages)
    logits, cache = policy.actor.forward_cache(encs)
    probs = softmax(logits)
    dlogits = _policy_logit_grads(probs, actions, advantages, cfg.entropy_coef)
    actor_grads, _ = policy.actor.backward(cache, dlogits)
    return actor_grads, critic_grads


def ppo_gradients(policy: StudentPolicy, trajs: list[Trajectory],
                  cfg: StudentConfig, advantages: np.ndarray,
                  targets: np.ndarray, old_logps: np.ndarray):
    """Loss gradients for one clipped-surrogate epoch at the current params.

    Steps where the probability ratio is clipped and the clip binds
    contribute no policy gradient; the entropy bonus always applies.
    """
    encs = np.stack([s.enc for tr in trajs for s in tr.steps])
    actions = np.array([s.action for tr in trajs for s in tr.steps])
    m = len(actions)

    logits, cache = policy.actor.forward_cache(encs)
    probs = softmax(logits)
    logps = np.array([log_softmax(logits[i])[actions[i]] for i in range(m)])
    ratios = np.exp(logps - old_logps)
    clipped_high = (ratios > 1.0 + cfg.clip_eps) & (advantages > 0)
    clipped_low = (ratios < 1.0 - cfg.clip_eps) & (advantages < 0)
    active = ~(clipped_high | clipped_low)

    dlogits = probs.copy()
    dlogits[np.arange(m), actions] -= 1.0
    dlogits *= (advantages * ratios * active)[:, None] / m
    if cfg.entropy_coef:
        for i in range(m):
            dlogits[i] -= (cfg.entropy_coef / m) * entropy_grad_wrt_logits(probs[i])
    actor_grads, _ = policy.actor.backward(cache, dlogits)
    critic_grads, _ = _critic_grads(policy, encs, targets, cfg.vf_coef)
    return actor_grads, critic_grads, float(active.mean())


def update_a2c(policy: StudentPolicy, trajs: list[Trajectory]) -> dict:
    if not trajs:
        raise ContractError("update needs at least one trajectory")
    cfg = policy.cfg
    actor_grads, critic_grads = a2c_gradients(policy, trajs, cfg)
    a_norm = clip_global_norm(actor_grads, cfg.grad_clip)
    c_norm = clip_global_norm(critic_grads, cfg.grad_clip)
    adam_step(policy.actor.params, actor_grads, policy.actor_opt)
    adam_step(policy.critic.params, critic_grads, policy.critic_opt)
    return {"actor_grad_norm": a_norm, "critic_grad_norm": c_norm}


def update_ppo(policy: StudentPolicy, trajs: list[Trajectory]) -> dict:
    if not trajs:
        raise ContractError("update needs at least one trajectory")
    cfg = policy.cfg
    encs, _, targets = _flatten_batch(trajs, cfg.gamma)
    values = policy.critic.forward(encs)[:, 0]
    advantages = np.concatenate([
        gae_advantages(tr.rewards(), values[lo:hi], cfg.gamma, cfg.gae_lambda)
        for tr, (lo, hi) in zip(trajs, _traj_slices(trajs))
    ])
    if cfg.adv_norm:
        advantages = _normalize(advantages)
    old_logps = np.array([s.logp for tr in trajs for s in tr.steps])

    stats = {}
    for _ in range(cfg.ppo_epochs):
        actor_grads, critic_grads, frac = ppo_gradients(
            policy, trajs, cfg, advantages, targets, old_logps)
        stats["actor_grad_norm"] = clip_global_norm(actor_grads, cfg.grad_clip)
        stats["critic_grad_norm"] = clip_global_norm(critic_grads, cfg.grad_clip)
        stats["active_fraction"] = frac
        adam_step(policy.actor.params, actor_grads, policy.actor_opt)
        adam_step(policy.critic.params, critic_grads, policy.critic_opt)
    return stats


def update(policy: StudentPolicy, trajs: list[Trajectory]) -> dict:
    if policy.cfg.algo == "ppo":
        return update_ppo(policy, trajs)
    return update_a2c(policy, trajs)
