"""
Loss curve CSV (step, loss_name, value) per run directory
"""

import logging
import os
from typing import Dict, List

import pandas as pd

logger = logging.getLogger(__name__)

COLUMNS = ['step', 'loss_name', 'value']


class LossLog:
    """Buffered appender for the loss CSV"""

    def __init__(self, path: str, flush_every: int = 50):
        self.path = path
        self.flush_every = flush_every
        self.rows: List[Dict] = []
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    def append(self, step: int, losses: Dict[str, float]) -> None:
        for name, value in losses.items():
            self.rows.append({'step': int(step), 'loss_name': name, 'value': float(value)})
        if len(self.rows) >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if not self.rows:
            return
        frame = pd.DataFrame(self.rows, columns=COLUMNS)
        frame.to_csv(self.path, mode='a', header=not os.path.exists(self.path), index=False)
        self.rows = []

    def truncate_after(self, step: int) -> None:
        """Drop rows past `step` (used when resuming from an older checkpoint)"""
        self.flush()
        if os.path.exists(self.path):
            frame = read_loss_log(self.path)
            frame[frame['step'] <= step].to_csv(self.path, index=False)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.flush()


def read_loss_log(path: str) -> pd.DataFrame:
    return pd.read_csv(path)


def window_means(frame: pd.DataFrame, loss_name: str, window: int) -> pd.Series:
    """Mean of one loss over consecutive step windows"""
    series = frame[frame['loss_name'] == loss_name]
    return series.groupby(series['step'] // window)['value'].mean()
