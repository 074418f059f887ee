"""sgdcert: fixed-stepsize SGD dynamics and certified convergence bounds.

Modules map one-to-one onto the library's concerns:

  problems   finite convex smooth families with known minimizers
  optimizer  SGD runner, trajectories, Monte Carlo excess risk
  bounds     closed-form rates and tuned stepsizes as pure functions
  kaczmarz   randomized block Kaczmarz and its SGD reduction
  continual  continual linear regression, forgetting, convex sets, POCS
  certify    deterministic and Monte Carlo inequality certification
  harness    experiment orchestration, rate fits, report persistence
  cli        command-line entry points
"""

__version__ = "0.1.0"
