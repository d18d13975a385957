"""Shared pytest configuration: deterministic hypothesis settings."""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "glyphlib",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("glyphlib")
