import time
from contextlib import contextmanager


class Timer:
    def __init__(self):
        self.times = {}
        self.start_times = {}

    def start(self, name):
        self.start_times[name] = time.perf_counter()

    def stop(self, name):
        if name in self.start_times:
            elapsed = time.perf_counter() - self.start_times[name]
            self.times[name] = self.times.get(name, 0.0) + elapsed
            del self.start_times[name]
            return elapsed
        return 0

    @contextmanager
    def time_section(self, name):
        self.start(name)
        try:
            yield
        finally:
            self.stop(name)

    def get_times(self):
        return self.times.copy()
