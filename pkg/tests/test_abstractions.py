"""Windowed aggregation rules: registration, computation, purity."""
import pytest

from careflow.abstractions import (
    AbstractionError,
    AbstractionRule,
    AbstractionService,
    ThresholdMapping,
    load_rules,
)
from careflow.engine import UNKNOWN
from careflow.platform import Platform, Resource


def _temp(platform, value, at, patient="p1"):
    return platform.store(
        Resource(
            resource_type="Observation",
            patient_id=patient,
            code="body-temperature",
            value=value,
            source_type="patient",
            effective_at=at,
        )
    )


def _grade_rule(**overrides):
    fields = dict(
        id="grade",
        output_item="temp_grade",
        resource_type="Observation",
        code="body-temperature",
        window=86400,
        aggregator="max",
        mapping=ThresholdMapping(floor=0, thresholds=((38.0, 1), (39.0, 2))),
    )
    fields.update(overrides)
    return AbstractionRule(**fields)


def test_register_and_resolve_by_both_keys():
    svc = AbstractionService(Platform())
    svc.register_rule(_grade_rule())
    assert svc.rule_for("grade") is svc.rule_for("temp_grade")


def test_duplicate_rule_id_rejected():
    svc = AbstractionService(Platform())
    svc.register_rule(_grade_rule())
    with pytest.raises(AbstractionError):
        svc.register_rule(_grade_rule(output_item="other"))


def test_non_increasing_thresholds_rejected():
    svc = AbstractionService(Platform())
    with pytest.raises(AbstractionError):
        svc.register_rule(
            _grade_rule(mapping=ThresholdMapping(floor=0, thresholds=((39.0, 2), (38.0, 1))))
        )


def test_threshold_mapping_on_max():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(_grade_rule())
    _temp(platform, 37.2, at=1000)
    _temp(platform, 38.6, at=2000)
    result = svc.compute("grade", "p1", now=3000)
    # max 38.6: greatest threshold <= value is 38.0 -> grade 1.
    assert result.value == 1
    assert len(result.inputs_used) == 2
    assert result.computed_at == 3000


def test_below_lowest_threshold_maps_to_floor():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(_grade_rule())
    _temp(platform, 36.8, at=1000)
    assert svc.compute("grade", "p1", now=3000).value == 0


def test_no_inputs_in_window_is_unknown():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(_grade_rule())
    result = svc.compute("grade", "p1", now=3000)
    assert result.value is UNKNOWN
    assert result.inputs_used == ()


def test_out_of_window_inputs_ignored():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(_grade_rule())
    _temp(platform, 39.5, at=1000)          # more than 24h before "now"
    _temp(platform, 38.2, at=87000)
    result = svc.compute("grade", "p1", now=1000 + 86401)
    assert result.value == 1  # only the 38.2 reading counts
    assert len(result.inputs_used) == 1


def test_window_soundness_out_of_window_perturbation():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(_grade_rule())
    _temp(platform, 38.2, at=87000)
    before = svc.compute("grade", "p1", now=87400)
    _temp(platform, 41.0, at=999)  # outside (87400-86400, 87400]
    after = svc.compute("grade", "p1", now=87400)
    assert before.value == after.value == 1
    assert set(after.inputs_used) == set(before.inputs_used)


def test_mapping_monotone_in_inputs():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(_grade_rule())
    _temp(platform, 38.2, at=1000)
    low = svc.compute("grade", "p1", now=2000).value
    _temp(platform, 39.4, at=1500)
    high = svc.compute("grade", "p1", now=2000).value
    assert high >= low


def test_compute_is_pure():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(_grade_rule())
    _temp(platform, 38.2, at=1000)
    snapshot = platform._resources.copy()
    svc.compute("grade", "p1", now=2000)
    assert platform._resources == snapshot


def test_latest_count_exists_aggregators():
    platform = Platform()
    svc = AbstractionService(platform)
    svc.register_rule(
        AbstractionRule(id="latest", output_item="o1", resource_type="Observation",
                        code="body-temperature", aggregator="latest")
    )
    svc.register_rule(
        AbstractionRule(id="count", output_item="o2", resource_type="Observation",
                        code="body-temperature", window=1000, aggregator="count")
    )
    svc.register_rule(
        AbstractionRule(id="exists", output_item="o3", resource_type="Observation",
                        code="body-temperature", aggregator="exists")
    )
    assert svc.compute("count", "p1", now=500).value is UNKNOWN
    _temp(platform, 37.0, at=100)
    _temp(platform, 39.0, at=200)
    assert svc.compute("latest", "p1", now=500).value == 39.0
    assert svc.compute("count", "p1", now=500).value == 2
    assert svc.compute("exists", "p1", now=500).value is True


def test_unknown_rule_raises():
    svc = AbstractionService(Platform())
    with pytest.raises(AbstractionError):
        svc.compute("nope", "p1", now=0)


def test_load_rules_from_file(tmp_path, assets_dir):
    platform = Platform()
    svc = AbstractionService(platform)
    count = load_rules(svc, assets_dir / "kdom" / "rules.json")
    assert count == 5
    _temp(platform, 38.6, at=100)
    assert svc.compute("temp_grade_rule", "p1", now=3600).value == 2
