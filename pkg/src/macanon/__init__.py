"""Keyed, truncated MAC address anonymization with collision-rate planning."""

from .analytics import (
    CollisionPrediction,
    PlanResult,
    allocated_space_bits,
    approx_bits_at_least_one,
    birthday_m,
    birthday_n,
    collision_rate,
    coverage_bits,
    expected_collisions,
    generate_table,
    min_bits_for_rate,
)
from .anonymizer import (
    AnonymizationPolicy,
    BucketDigest,
    KdfParams,
    Salt,
    anonymize,
    rotate_salt,
    truncate_digest,
)
from .mac import DEFAULT_RANGE, MacAddress, MacRange, format_mac, nic, oui, parse_mac, sample_unique_macs
from .simulator import ExperimentReport, TrialConfig, generate_table3, run_experiment, run_trial

__all__ = [
    "AnonymizationPolicy", "BucketDigest", "CollisionPrediction", "DEFAULT_RANGE", "ExperimentReport",
    "KdfParams", "MacAddress", "MacRange", "PlanResult", "Salt", "TrialConfig",
    "allocated_space_bits", "anonymize", "approx_bits_at_least_one", "birthday_m", "birthday_n",
    "collision_rate", "coverage_bits", "expected_collisions", "format_mac", "generate_table",
    "generate_table3", "min_bits_for_rate", "nic", "oui", "parse_mac", "rotate_salt",
    "run_experiment", "run_trial", "sample_unique_macs", "truncate_digest",
]
