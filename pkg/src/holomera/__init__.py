"""Holographic simulation of isometric tensor networks (MERA, gMERA, QC-l).

Typical flow: ground state by DMRG (:mod:`holomera.mps`), a finite-depth
network carved out of it (:mod:`holomera.network`), overlap optimization
(:mod:`holomera.optimize`), compilation to a qubit-reusing circuit
(:mod:`holomera.circuit`) and exact or noisy execution
(:mod:`holomera.simulator`). :mod:`holomera.pipeline` chains all of it.
"""
__version__ = "0.1.0"
