from collections import deque
from dataclasses import dataclass
from time import time as now


@dataclass
class _Mark:
    value: int
    time: float


class Progress:
    """Speed of a growing counter over a sliding window of marks.

    Marks closer than `window_granularity_seconds` to the previous one are merged.
    """

    def __init__(self, window_size: int = 50, window_granularity_seconds: float = 0):
        assert window_size > 1
        assert window_granularity_seconds >= 0
        self._marks: deque[_Mark] = deque(maxlen=window_size + 1)
        self._granularity = window_granularity_seconds
        self._has_news = False

    def set_current_value(self, value: int, time: float | None = None) -> None:
        if time is None:
            time = now()

        if not self._marks:
            self._marks.append(_Mark(value, time))
            return

        last = self._marks[-1]
        value = max(value, last.value)
        if time <= last.time or (len(self._marks) > 1 and time <= last.time + self._granularity):
            last.value = value
        else:
            self._marks.append(_Mark(value, time))
        self._has_news = True

    def get_current_value(self) -> int:
        assert self._marks, 'no current value available'
        return self._marks[-1].value

    def has_news(self) -> bool:
        return self._has_news

    def speed(self) -> float:
        self._has_news = False
        if len(self._marks) < 2:
            return 0
        beg, end = self._marks[0], self._marks[-1]
        return (end.value - beg.value) / (end.time - beg.time)
