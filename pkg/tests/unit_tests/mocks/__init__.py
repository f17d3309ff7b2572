from .mock_evaluation_services import (
    MockMultiprocEvaluationService,
    MockSequentialEvaluationService,
)

__all__ = [
    "MockMultiprocEvaluationService",
    "MockSequentialEvaluationService",
]
