"""Privacy-preserving B2B reputation over homomorphically encrypted state.

Layers, bottom up: :mod:`repsim.he` (encrypted arithmetic),
:mod:`repsim.identity` (pseudonyms, tickets, tokens),
:mod:`repsim.reputation` (the rating algebra), :mod:`repsim.protocol`
(entity state machines), :mod:`repsim.harness` (scenarios, audit, replay)
and :mod:`repsim.bench` (timings and capacity projection).
"""

__version__ = "0.1.0"
