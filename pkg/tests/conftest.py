"""Shared test configuration: hypothesis profile and backend selection."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

import detcal.kde
from detcal import _kernels_py

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_BACKENDS = {"python": _kernels_py}
try:
    from detcal import _kernels

    _BACKENDS["compiled"] = _kernels
except ImportError:
    pass


@pytest.fixture(params=sorted(_BACKENDS))
def each_backend(request, monkeypatch):
    """Run the test once per available kernel backend.

    Patches the module object the estimator layer dispatches through, so
    the whole public API (not just the raw kernels) is exercised on both
    implementations.
    """
    module = _BACKENDS[request.param]
    monkeypatch.setattr(detcal.kde, "kernels", module)
    return module


@pytest.fixture(scope="session")
def fixture_dir():
    import pathlib

    return pathlib.Path(__file__).parent / "fixtures"
