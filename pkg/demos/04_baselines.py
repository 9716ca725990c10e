"""The non-adversarial curriculum baselines: bandits and a fixed ladder.

Three alternatives to the gradient teacher, all behind the same interface:
EXP3 treats tasks as adversarial bandit arms, the slope bandit chases tasks
whose returns are changing fastest, and the ordered baseline walks a fixed
tier ladder. `make_teacher` builds any of them from a config.
"""

import numpy as np

from hap.baselines import Exp3Teacher, TsclTeacher, make_teacher
from hap.envs.base import TaskSpace
from hap.nn import sample
from hap.rng import SeedTree
from hap.teacher import CurriculumConfig

space = TaskSpace(tasks=("left", "right"), tiers={"left": "easy", "right": "easy"},
                  deps={})

# -- EXP3 on a stationary two-arm bandit -------------------------------------

# Arm "left" always pays 1, arm "right" always pays 0. EXP3 must find this.
cfg = CurriculumConfig(kind="exp3", exp3_gamma=0.1, p_min=0.0,
                       warmup_episodes_per_task=0, update_every=1)
exp3 = Exp3Teacher(space, cfg, SeedTree(7).stream("exp3"), return_bounds=(0.0, 1.0))
rng = SeedTree(7).stream("arms")
pulls = []
for _ in range(500):
    idx = sample(exp3.distribution(), rng)
    task = space.tasks[idx]
    reward = 1.0 if task == "left" else 0.0
    exp3.on_episode(idx, reward, reward > 0)
    exp3.update([(task, reward)])
    pulls.append(idx)

frequency = 1.0 - np.mean(pulls[250:])
print(f"exp3 picks the paying arm {frequency:.0%} of the time in rounds 250-500")

# -- the slope bandit prefers tasks with moving returns ----------------------

cfg = CurriculumConfig(kind="tscl", tscl_eps=0.1, tscl_window=10, p_min=0.0,
                       warmup_episodes_per_task=0, update_every=1)
tscl = TsclTeacher(space, cfg, SeedTree(9).stream("tscl"))
# "left" has flat returns, "right" keeps improving: slope favors "right".
for t in range(40):
    tscl.on_episode(0, 0.5, True)
    tscl.update([("left", 0.5)])
    tscl.on_episode(1, 0.02 * t, False)
    tscl.update([("right", 0.02 * t)])

probs = tscl.distribution().probs
print(f"slope bandit distribution: left={probs[0]:.2f} right={probs[1]:.2f}")
print(f"  (greedy mass 1-eps+eps/n = {1 - 0.1 + 0.1 / 2:.2f} lands on the mover)")

# -- one factory for every teacher -------------------------------------------

for kind in ("logit", "history", "uniform", "ordered", "exp3", "tscl"):
    teacher = make_teacher(space, CurriculumConfig(kind=kind),
                           SeedTree(1).stream(kind), return_bounds=(0.0, 1.0))
    print(f"{kind:8s} -> {type(teacher).__name__}")
