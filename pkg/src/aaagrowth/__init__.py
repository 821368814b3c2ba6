"""Local, time-conditioned growth prediction for vascular surface meshes.

Subpackages and modules:

- ``ga``: projective geometric algebra G(3,0,1) arithmetic and equivariant
  neural building blocks.
- ``autodiff``: the reverse-mode differentiation engine the networks run on.
- ``surface``: triangulated-surface I/O, sampling, metrics, geodesics,
  clinical measurements, and rigid alignment.
- ``temporal``: per-patient continuous growth fields (velocity network, ODE
  integration, fitting, interpolation).
- ``model``: the equivariant transformer growth predictor.
- ``trainer``: temporal-augmentation training, baselines, evaluation.
- ``synth``: deterministic synthetic longitudinal cohorts with analytic
  ground truth.
- ``cli``: the ``aaagrowth`` command-line pipeline.
"""

__version__ = "0.1.0"
