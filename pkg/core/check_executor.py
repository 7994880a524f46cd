"""
Check Executor - Runs verification checks with a timeout and resource monitoring
"""
import logging
import threading
import time
import traceback
from typing import Any, Callable, Dict, Optional

import psutil

logger = logging.getLogger(__name__)


class CheckExecutor:
    def __init__(self, timeout: float = 600, monitor_memory: bool = True):
        self.timeout = timeout
        self.monitor_memory = monitor_memory

    def execute_check(self, name: str, check: Callable[[], Any]) -> Dict[str, Any]:
        """
        Run one check in a worker thread
        Returns: {
            'success': bool,
            'result': any,
            'error': str,
            'execution_time': float,
            'memory_used': float,
            'timed_out': bool
        }
        """
        start_time = time.time()
        start_memory = self._get_memory_usage()
        outcome: Dict[str, Any] = {}

        def run():
            try:
                outcome['result'] = check()
            except Exception as e:
                outcome['error'] = f"{type(e).__name__}: {e}"
                outcome['traceback'] = traceback.format_exc()

        worker = threading.Thread(target=run, name=f"check-{name}")
        worker.daemon = True
        worker.start()
        worker.join(timeout=self.timeout)

        elapsed = time.time() - start_time
        memory_used = self._get_memory_usage() - start_memory

        if worker.is_alive():
            logger.error(f"Check '{name}' timed out after {self.timeout}s")
            return {
                'success': False,
                'result': None,
                'error': f'Check timeout ({self.timeout}s)',
                'execution_time': elapsed,
                'memory_used': memory_used,
                'timed_out': True,
            }

        if 'error' in outcome:
            logger.error(f"Check '{name}' raised {outcome['error']}")
            logger.debug(outcome['traceback'])
            return {
                'success': False,
                'result': None,
                'error': outcome['error'],
                'execution_time': elapsed,
                'memory_used': memory_used,
                'timed_out': False,
            }

        logger.info(f"Check '{name}' finished in {elapsed:.2f}s")
        return {
            'success': True,
            'result': outcome.get('result'),
            'error': None,
            'execution_time': elapsed,
            'memory_used': memory_used,
            'timed_out': False,
        }

    def _get_memory_usage(self) -> float:
        """Get current memory usage in MB"""
        if not self.monitor_memory:
            return 0.0
        try:
            process = psutil.Process()
            return process.memory_info().rss / 1024 / 1024
        except Exception:
            return 0.0

    def get_system_resources(self) -> Dict[str, Optional[float]]:
        """Return snapshot of the resources available to a verification run"""
        try:
            mem = psutil.virtual_memory()
            return {
                "cpu_count": psutil.cpu_count(),
                "memory_total_mb": mem.total / (1024 * 1024),
                "memory_available_mb": mem.available / (1024 * 1024),
                "process_rss_mb": self._get_memory_usage(),
            }
        except Exception as e:
            logger.warning(f"Could not read system resources: {e}")
            return {}
