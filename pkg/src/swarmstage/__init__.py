"""Deterministic multi-robot performance simulator and library suite.

Subsystems: robot motion models (`kinematics`), the behavior engine and
program library (`behaviors`), the single-topic gossip layer (`wire`,
`bus`), the localization stacks (`localization`), and the performance
orchestrator with its CLI and console server (`orchestrator`, `cli`,
`server`).
"""

__version__ = "0.1.0"
