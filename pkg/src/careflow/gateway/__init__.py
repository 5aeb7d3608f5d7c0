"""Front door: virtual clock, environment wiring, scenario runner, HTTP API."""

from .clock import VirtualClock
from .environment import (
    AlreadyRespondedError,
    Environment,
    EnvironmentConfig,
    GatewayError,
    RecommendationResponse,
    ResponseGateError,
    UnknownPatientError,
    UnknownRecommendationError,
)
from .scenario import (
    ScenarioError,
    ScenarioResult,
    ScenarioScript,
    load_scenario,
    parse_scenario,
    run_scenario,
)

__all__ = [
    "AlreadyRespondedError",
    "Environment",
    "EnvironmentConfig",
    "GatewayError",
    "RecommendationResponse",
    "ResponseGateError",
    "ScenarioError",
    "ScenarioResult",
    "ScenarioScript",
    "UnknownPatientError",
    "UnknownRecommendationError",
    "VirtualClock",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
]
