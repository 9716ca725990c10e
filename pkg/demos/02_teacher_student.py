"""The adversarial teacher-student loop, hand-wired at small scale.

The student runs advantage actor-critic on whatever task it is handed. The
teacher plays the opposing side of a zero-sum game: it earns the negative
of the student's return, so its gradient pushes probability mass toward
tasks the student still fails. An entropy bonus keeps it from collapsing
onto one task and a probability floor keeps every task assignable.

Watch the distribution drift toward the hard tasks as the easy ones are
mastered, then flatten as the student catches up everywhere.
"""

import numpy as np

from hap.envs import make_env
from hap.nn import sample
from hap.rng import SeedTree
from hap.student import StudentConfig, StudentPolicy, evaluate, rollout, update
from hap.teacher import CurriculumConfig, LogitTeacher

env = make_env("nav", distances=(1, 2, 4, 6), cap=40)
tree = SeedTree(0)
policy = StudentPolicy(env.obs_dim, env.n_actions, StudentConfig(),
                       tree.stream("student-init"))
teacher = LogitTeacher(env.space, CurriculumConfig(
    kind="logit", teacher_lr=0.3, entropy_weight=0.05, p_min=0.05,
    warmup_episodes_per_task=60, update_every=25))
act_rng = tree.stream("student-act")
task_rng = tree.stream("teacher-sample")

steps = 0
episode = 0
batch = []
teacher_batch = []
while steps < 30_000:
    dist = teacher.distribution()
    in_warmup = teacher.in_warmup
    idx = sample(dist, task_rng)
    task = env.space.tasks[idx]
    traj = rollout(policy, env, task, 2 * episode, act_rng)
    episode += 1
    steps += len(traj.steps)
    batch.append(traj)
    teacher.on_episode(idx, traj.discounted_return, traj.success)
    if len(batch) >= 2:
        update(policy, batch)
        batch = []
    if not in_warmup:
        teacher_batch.append((task, traj.discounted_return))
        if len(teacher_batch) >= 25:
            teacher.update(teacher_batch)
            teacher_batch = []
    if episode % 300 == 0:
        probs = np.round(teacher.distribution().probs, 2)
        rates = [evaluate(policy, env, t, 10)[0] for t in env.space.tasks]
        print(f"episode {episode:5d} steps {steps:6d} "
              f"teacher {probs} eval {np.round(rates, 1)}")

print("\nfinal teacher distribution:", np.round(teacher.distribution().probs, 3))
print("tasks:", env.space.tasks)
