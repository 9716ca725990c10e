"""Adversarial curriculum laboratory.

A task-picking teacher plays a zero-sum game against a reinforcement-learning
student over small gridworld task spaces: the teacher shifts sampling mass
onto the tasks the student currently fails (tempered by an entropy bonus and
a probability floor), and the student trains under the resulting curriculum.
"""

__version__ = "0.1.0"
