class MockSequentialEvaluationService:
    def evaluate(self, func, tasks):
        # The return value doesn't really matter here.
        # We just need something to identify which class was called.
        return ["MockSequentialEvaluationService.evaluate"]


class MockMultiprocEvaluationService:
    def __init__(self, workers):
        self.workers = workers

    def evaluate(self, func, tasks):
        return ["MockMultiprocEvaluationService.evaluate", self.workers]
