"""Autonomous optical network operations at desk scale.

A deterministic multi-domain optical network simulator (long-haul backbone,
DCI metro, intra-datacenter fabric) driven by a hierarchical multi-agent
system whose inter-agent transfers follow the Chain-of-Identity protocol.
"""

__version__ = "0.1.0"
