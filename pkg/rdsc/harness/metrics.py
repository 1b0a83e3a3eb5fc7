import time
from typing import Iterable

from prometheus_client import Metric
from prometheus_client.metrics_core import CounterMetricFamily, GaugeMetricFamily, InfoMetricFamily
from prometheus_client.registry import Collector

from rdsc.util.counters import Progress


class ExperimentStats:
    def __init__(self, experiment: str):
        self.experiment = experiment
        self.processed = 0
        self.failed = 0
        self.condition = ''
        self._progress = Progress(window_size=10, window_granularity_seconds=1)
        self._progress.set_current_value(0)

    def on_image(self, failed: bool = False, current_time: float | None = None) -> None:
        self.processed += 1
        if failed:
            self.failed += 1
        self._progress.set_current_value(self.processed, current_time or time.time())

    def speed(self) -> float:
        return self._progress.speed()


class ExperimentMetricsCollector(Collector):
    def __init__(self, stats: ExperimentStats):
        self.stats = stats

    def collect(self) -> Iterable[Metric]:
        yield CounterMetricFamily(
            'rdsc_images_processed',
            'Images processed by the running experiment',
            self.stats.processed
        )
        yield CounterMetricFamily(
            'rdsc_images_failed',
            'Images whose processing raised an error',
            self.stats.failed
        )
        yield GaugeMetricFamily(
            'rdsc_images_per_second',
            'Overall image processing speed',
            self.stats.speed()
        )
        yield InfoMetricFamily(
            'rdsc_experiment',
            'Running experiment and its last condition',
            value={'experiment': self.stats.experiment, 'condition': self.stats.condition}
        )


def start_metrics_server(port: int, stats: ExperimentStats) -> None:
    from prometheus_client import REGISTRY, start_wsgi_server
    REGISTRY.register(ExperimentMetricsCollector(stats))
    start_wsgi_server(port)
