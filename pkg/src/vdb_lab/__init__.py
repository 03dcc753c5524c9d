"""Adversarial learning with information-bottlenecked discriminators.

A small, self-contained laboratory built on numpy float64: a hand-rolled
neural-net core with exact gradients, a constrained discriminator whose
latent code is squeezed through a KL budget, toy 2D generation tasks,
point-mass maze control, on-policy policy optimization, adversarial
imitation, reward recovery with transfer to mirrored layouts, and
closed-form capacity bounds with numerical verification.

Subpackages are imported lazily; see `vdb_lab.nn`, `vdb_lab.bottleneck`,
`vdb_lab.synth`, `vdb_lab.envs`, `vdb_lab.rl`, `vdb_lab.imitation`,
`vdb_lab.bounds`, and the `vdb-lab` command line entry point.
"""

__version__ = "0.1.0"
