"""
Ordered worker pool
Runs independent tasks on a fixed number of threads and returns their results
in task order, so the outcome never depends on scheduling or worker count.
"""

import threading
import logging

logger = logging.getLogger(__name__)


class OrderedWorkerPool:
    """Thread-per-worker pool with deterministic result ordering"""

    def __init__(self, workers=1):
        self.workers = max(1, int(workers))
        self.threads = []

    def run(self, tasks):
        """
        Execute callables and collect their results

        Args:
            tasks: List of zero-argument callables

        Returns:
            List of results, index-aligned with tasks
        """
        tasks = list(tasks)
        results = [None] * len(tasks)
        errors = [None] * len(tasks)

        if self.workers == 1 or len(tasks) <= 1:
            for index, task in enumerate(tasks):
                results[index] = task()
            return results

        lock = threading.Lock()
        next_index = [0]

        def worker(worker_id):
            while True:
                with lock:
                    index = next_index[0]
                    next_index[0] += 1
                if index >= len(tasks):
                    return
                try:
                    results[index] = tasks[index]()
                except BaseException as e:  # re-raised on the caller's thread
                    logger.error(f"Worker {worker_id}: task {index} failed - {e}")
                    errors[index] = e

        self.threads = []
        for worker_id in range(min(self.workers, len(tasks))):
            thread = threading.Thread(target=worker, args=(worker_id,), daemon=True)
            thread.start()
            self.threads.append(thread)

        for thread in self.threads:
            thread.join()

        for error in errors:
            if error is not None:
                raise error
        return results


def run_ordered(tasks, workers=1):
    """Run tasks on `workers` threads; results come back in task order"""
    return OrderedWorkerPool(workers).run(tasks)
