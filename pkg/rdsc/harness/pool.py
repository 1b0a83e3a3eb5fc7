import multiprocessing
from typing import Any, Callable, Iterable, Iterator, TypeVar

from rdsc.util.child_proc import init_child_process


T = TypeVar('T')
R = TypeVar('R')


# context shared by all tasks of a worker process, set by the pool initializer
_CONTEXT: Any = None


def _init_worker(context: Any) -> None:
    init_child_process()
    global _CONTEXT
    _CONTEXT = context


def _run_task(args: tuple[Callable[[Any, T], R], T]) -> R:
    fn, task = args
    return fn(_CONTEXT, task)


def map_ordered(
        fn: Callable[[Any, T], R],
        context: Any,
        tasks: Iterable[T],
        workers: int = 1
) -> Iterator[R]:
    """Apply `fn(context, task)` to every task, yielding results in task order.

    `fn` and `context` must be picklable when workers > 1.
    """
    if workers <= 1:
        for task in tasks:
            yield fn(context, task)
        return

    pool = multiprocessing.get_context('spawn').Pool(
        processes=workers,
        initializer=_init_worker,
        initargs=(context,)
    )
    try:
        yield from pool.imap(_run_task, ((fn, task) for task in tasks))
        pool.close()
    except BaseException:
        pool.terminate()
        raise
    finally:
        pool.join()
