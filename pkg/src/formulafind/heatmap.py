"""Export of per-timestep RNN outputs for visual inspection."""
from __future__ import annotations

import csv
from typing import TextIO

import numpy as np


def write_heatmap_csv(rnn_out: np.ndarray, sink: TextIO) -> None:
    """Write the l x t RNN output matrix as CSV, one timestep per row."""
    writer = csv.writer(sink)
    for row in rnn_out:
        writer.writerow([f"{v:.8g}" for v in row])


def to_grayscale(rnn_out: np.ndarray) -> np.ndarray:
    """Min-max normalize a matrix to 8-bit grayscale pixels."""
    lo = float(rnn_out.min())
    hi = float(rnn_out.max())
    if hi == lo:
        return np.zeros(rnn_out.shape, dtype=np.uint8)
    scaled = (rnn_out.astype(np.float64) - lo) / (hi - lo) * 255.0
    return np.rint(scaled).astype(np.uint8)


def write_heatmap_pgm(rnn_out: np.ndarray, sink) -> None:
    """Write the matrix as a binary PGM (P5) grayscale image."""
    pixels = to_grayscale(rnn_out)
    h, w = pixels.shape
    sink.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
    sink.write(pixels.tobytes())
