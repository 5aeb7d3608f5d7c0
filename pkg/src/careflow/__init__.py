"""careflow: clinical task-network guideline enactment at desk scale.

A guideline language with an open meta-property registry, an enactment
engine with three-valued expression logic, a journaled resource/event
platform, abstraction and conflict-mitigation services, assessment and
coaching orchestrators, and a deterministic scenario gateway.
"""

__version__ = "0.1.0"
