"""Non-adversarial curriculum policies behind the teacher interface.

All four emit a Categorical whose minimum probability meets the configured
floor.  The bandits (EXP3, TSCL) carry their own exploration mass; their
constructors reject configs where that mass would undercut the floor, so
the affine floor projection never has to distort their exact selection
probabilities.
"""

import numpy as np

from .envs.base import ContractError, TaskSpace
from .nn import Categorical, one_hot, softmax
from .teacher import CurriculumConfig, TeacherBase, apply_floor

TIER_RANK = {"easy": 0, "middle": 1, "hard": 2}


class UniformTeacher(TeacherBase):
    def _raw_probs(self):
        return np.full(self.space.n, 1.0 / self.space.n)

    def _update(self, batch):
        return {"mean_return": float(np.mean([r for _, r in batch]))}


class OrderedTeacher(TeacherBase):
    """Hand-built easy-to-hard curriculum with a monotone pointer.

    All mass (minus floor) sits on the first task whose evaluation success
    is still below the threshold; the pointer only ever advances.
    """

    def __init__(self, space: TaskSpace, cfg: CurriculumConfig, rng=None):
        super().__init__(space, cfg, rng)
        ranks = [TIER_RANK[space.tiers[t]] for t in space.tasks]
        if ranks != sorted(ranks):
            raise ValueError("ordered curriculum needs tier-sorted tasks")
        self.pointer = 0

    def _raw_probs(self):
        return one_hot(self.pointer, self.space.n)

    def on_eval(self, success_rates: dict[str, float]):
        while self.pointer < self.space.n - 1:
            task = self.space.tasks[self.pointer]
            if success_rates.get(task, 0.0) >= self.cfg.ordered_threshold:
                self.pointer += 1
            else:
                break

    def _update(self, batch):
        return {"mean_return": float(np.mean([r for _, r in batch])),
                "pointer": self.pointer}


class Exp3Teacher(TeacherBase):
    """Adversarial-bandit baseline; log-domain weights for long runs."""

    def __init__(self, space: TaskSpace, cfg: CurriculumConfig,
                 rng=None, return_bounds: tuple[float, float] = (0.0, 1.0)):
        super().__init__(space, cfg, rng)
        if cfg.exp3_gamma / space.n < cfg.p_min:
            raise ValueError("exp3 exploration mass must cover p_min")
        self.log_weights = np.zeros(space.n)
        self.lo, self.hi = return_bounds
        if not self.lo < self.hi:
            raise ValueError("return bounds must be increasing")

    def _raw_probs(self):
        g = self.cfg.exp3_gamma
        return (1.0 - g) * softmax(self.log_weights) + g / self.space.n

    def distribution(self) -> Categorical:
        if self.in_warmup:
            return super().distribution()
        # the emitted probabilities feed the importance weights, so no
        # projection: exploration mass already covers the floor
        probs = self._raw_probs()
        assert probs.min() >= self.cfg.p_min
        return Categorical(probs)

    def rescale(self, ret: float) -> float:
        x = (ret - self.lo) / (self.hi - self.lo)
        if not 0.0 <= x <= 1.0:
            raise ContractError(f"return {ret} outside bounds [{self.lo}, {self.hi}]")
        return x

    def _update(self, batch):
        probs = self._raw_probs()
        for task, ret in batch:
            i = self.space.index(task)
            x = self.rescale(ret)
            self.log_weights[i] += self.cfg.exp3_gamma * (x / probs[i]) / self.space.n
            probs = self._raw_probs()
        return {"mean_return": float(np.mean([r for _, r in batch]))}


class TsclTeacher(TeacherBase):
    """Learning-progress bandit: epsilon-greedy over absolute return slopes.

    A task with fewer than two recorded returns has undefined slope and is
    treated as infinitely interesting.  Ties split uniformly, so constant
    returns everywhere give a uniform distribution and a uniquely rising
    task is picked with probability exactly 1 - eps + eps/n.
    """

    def __init__(self, space: TaskSpace, cfg: CurriculumConfig, rng=None):
        super().__init__(space, cfg, rng)
        if cfg.tscl_eps / space.n < cfg.p_min:
            raise ValueError("tscl exploration mass must cover p_min")
        self.returns = [[] for _ in range(space.n)]

    def slope(self, i: int) -> float:
        ys = self.returns[i][-self.cfg.tscl_window:]
        if len(ys) < 2:
            return np.inf
        xs = np.arange(len(ys), dtype=float)
        k, _ = np.polyfit(xs, np.array(ys), 1)
        return abs(float(k))

    def _raw_probs(self):
        eps, n = self.cfg.tscl_eps, self.space.n
        slopes = np.array([self.slope(i) for i in range(n)])
        best = slopes == slopes.max()
        probs = np.full(n, eps / n)
        probs[best] += (1.0 - eps) / best.sum()
        return probs

    def distribution(self) -> Categorical:
        if self.in_warmup:
            return super().distribution()
        # exploration already dominates the floor (checked at construction)
        probs = self._raw_probs()
        assert probs.min() >= self.cfg.p_min
        return Categorical(probs)

    def _update(self, batch):
        for task, ret in batch:
            self.returns[self.space.index(task)].append(float(ret))
        return {"mean_return": float(np.mean([r for _, r in batch]))}


def uniform_policy(space: TaskSpace, p_min: float = 0.0) -> Categorical:
    return apply_floor(Categorical(np.full(space.n, 1.0 / space.n)), p_min)


def make_teacher(space: TaskSpace, cfg: CurriculumConfig,
                 rng: np.random.Generator | None = None,
                 return_bounds: tuple[float, float] = (0.0, 1.0)) -> TeacherBase:
    from .teacher import HistoryTeacher, LogitTeacher, MetaTeacher

    if cfg.kind == "logit":
        return LogitTeacher(space, cfg, rng)
    if cfg.kind == "history":
        return HistoryTeacher(space, cfg, rng)
    if cfg.kind == "meta":
        return MetaTeacher(space, cfg, rng)
    if cfg.kind == "uniform":
        return UniformTeacher(space, cfg, rng)
    if cfg.kind == "ordered":
        return OrderedTeacher(space, cfg, rng)
    if cfg.kind == "exp3":
        return Exp3Teacher(space, cfg, rng, return_bounds)
    if cfg.kind == "tscl":
        return TsclTeacher(space, cfg, rng)
    raise ValueError(f"unknown curriculum kind {cfg.kind!r}")
