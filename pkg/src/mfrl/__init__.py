"""Mean-field control on the probability simplex: simulators, exact dynamic
programming, tabular mean-field Q-learning and an actor-critic trainer."""

__version__ = "0.1.0"
