"""bearnet: equivariant graph-network simulation of rolling-element bearings.

The package pairs a reference 2D lumped-parameter bearing simulator (the
ground-truth oracle) with an equivariant message-passing network that
integrates ring/roller motion with per-pass Euler sub-steps while jointly
predicting the pairwise contact forces, plus three baseline graph networks and
a rollout/metric pipeline for comparing them.
"""

__version__ = "0.1.0"
