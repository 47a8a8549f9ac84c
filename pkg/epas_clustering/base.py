from __future__ import absolute_import, annotations

import logging
import os

from dotenv import load_dotenv

load_dotenv()


class ClusteringBase:
    __WORKERS_ENV = 'EPAS_WORKERS'
    __MAX_WORKERS = 64
    _instance_count = 0  # Class variable to keep track of the instance number

    def __init__(self, workers: int = None, instance_name: str = None, progress_bar_desc: str = None):
        super().__init__()
        if workers is None:
            workers = int(os.environ.get(self.__WORKERS_ENV, '1'))
        self._workers = self._check_workers(workers)
        self.progress_bar_desc = progress_bar_desc
        if instance_name is None:
            ClusteringBase._instance_count += 1
            self.instance_name = f"Instance_{ClusteringBase._instance_count}"
        else:
            self.instance_name = instance_name

    @classmethod
    def _check_workers(cls, workers: int) -> int:
        if not isinstance(workers, int) or not 1 <= workers <= cls.__MAX_WORKERS:
            raise ValueError(f'Worker count \'{workers}\' not supported. Use an integer in [1, {cls.__MAX_WORKERS}].')
        return workers

    @property
    def workers(self) -> int:
        return self._workers

    @workers.setter
    def workers(self, value: int):
        value = self._check_workers(value)
        logging.warning('Changing worker count of %s from %s to %s.', self.instance_name, self.workers, value)
        self._workers = value

    def _progress_prefix(self, label: str) -> str:
        return f'{self.progress_bar_desc}: {label}' if self.progress_bar_desc else label
