"""Downlink simulator and learning toolkit for a morphable planar transmit
array assisted by a simultaneously transmitting/reflecting surface.

Submodules: numerics (streams, Gaussian tails), channel (geometry and
multipath draws), star (surface config/projection), fbl (SINR and
short-packet rates), env (the decision process), drl (TD3 and the
meta-critic variant on a from-scratch autodiff core), harness (configs,
experiment drivers, CSV).
"""

__version__ = "0.1.0"
