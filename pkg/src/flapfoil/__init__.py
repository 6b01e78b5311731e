"""Reinforcement-learning workbench for energy-efficient pitching-foil gaits.

Subpackages/modules:
    hydro    quasi-steady load surrogate, tail-beat planning, performance metrics
    mdp      tail-beat decision environment (action box, history state, episodes)
    reward   k-window efficiency rewards and reward/objective mismatch analytics
    agent    recurrent actor-critic trained with phasic policy gradient
    harness  experiment orchestration: training suites, gait sweeps, statistics
    cli      command-line entry point
"""

__version__ = "0.1.0"
