import logging

import pytest

import quditport.evaluation_service as es
from quditport.utils.constants import default_settings

from .mocks import MockMultiprocEvaluationService, MockSequentialEvaluationService


def _square(x):
    return x * x


@pytest.fixture(autouse=True)
def clear_settings_cache():
    default_settings.cache_clear()
    yield
    default_settings.cache_clear()


@pytest.fixture
def mock_services(mocker):
    mocker.patch(
        "quditport.evaluation_service.SequentialEvaluationService",
        new=MockSequentialEvaluationService,
    )
    mocker.patch(
        "quditport.evaluation_service.MultiprocEvaluationService",
        new=MockMultiprocEvaluationService,
    )


def test_one_worker_runs_sequentially(mock_services):
    assert es.evaluate(_square, [1, 2, 3], workers=1) == [
        "MockSequentialEvaluationService.evaluate"
    ]


def test_several_workers_use_the_pool(mock_services):
    assert es.evaluate(_square, [1, 2, 3], workers=3) == [
        "MockMultiprocEvaluationService.evaluate",
        3,
    ]


def test_single_task_never_starts_a_pool(mock_services):
    result = es.evaluate(_square, [1], workers=8)
    assert result == ["MockSequentialEvaluationService.evaluate"]


def test_workers_default_to_environment(mock_services, monkeypatch):
    monkeypatch.setenv("QUDITPORT_WORKERS", "2")
    result = es.evaluate(_square, [1, 2])
    assert result == ["MockMultiprocEvaluationService.evaluate", 2]


def test_warns_when_environment_forces_one_worker(monkeypatch, caplog):
    monkeypatch.setenv("QUDITPORT_WORKERS", "1")
    with caplog.at_level(logging.WARNING, logger="quditport.evaluation_service"):
        assert es.evaluate(_square, [1, 2, 3]) == [1, 4, 9]
    assert "QUDITPORT_WORKERS" in caplog.text


def test_no_warning_for_explicit_worker_count(monkeypatch, caplog):
    monkeypatch.setenv("QUDITPORT_WORKERS", "1")
    with caplog.at_level(logging.WARNING, logger="quditport.evaluation_service"):
        es.evaluate(_square, [1, 2, 3], workers=1)
    assert "QUDITPORT_WORKERS" not in caplog.text


def test_resolve_workers_rejects_zero():
    with pytest.raises(ValueError):
        es.resolve_workers(0)


def test_process_pool_preserves_order():
    service = es.MultiprocEvaluationService(2)
    assert service.evaluate(_square, list(range(10))) == [x * x for x in range(10)]
