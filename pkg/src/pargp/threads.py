"""BLAS thread control.

Every subset computation runs with a single BLAS thread, in workers and in the
coordinator alike, so results do not depend on how work is spread over workers.
"""
from contextlib import contextmanager

from threadpoolctl import threadpool_limits


@contextmanager
def single_blas_thread():
    with threadpool_limits(limits=1, user_api="blas"):
        yield
