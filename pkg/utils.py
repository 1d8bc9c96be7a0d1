import csv
import logging
import os
import random

import numpy as np
import torch

DTYPE = torch.float64


def setup_seed(seed):
    torch.manual_seed(seed)
    np.random.seed(seed)
    random.seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def setup_logging(level="INFO"):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def progress_bar(cur, total):
    total_num = 20
    progress_num = total_num * cur // max(total, 1)
    return progress_num * "#" + (total_num - progress_num) * "=" + f"{100 * cur / max(total, 1):3.1f}%"


def make_dir_if_not_exist(path):
    if path and not os.path.exists(path):
        os.makedirs(path, 0o0777)


def save_rows_csv(path, header, rows):
    """
    Write rows to a csv file with a header line, replacing any existing file.
    Floats are written with repr so that reruns are byte-identical.
    """
    make_dir_if_not_exist(os.path.dirname(path))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def as_tensor(x, dim=None):
    """Convert points to a float64 tensor, checking the trailing dimension when given."""
    t = torch.as_tensor(x, dtype=DTYPE)
    if dim is not None and (t.dim() == 0 or t.shape[-1] != dim):
        raise ValueError(f"dimension mismatch: expected trailing dimension {dim}, got shape {tuple(t.shape)}")
    return t
