"""Coded-aperture snapshot spectral imaging toolkit.

Simulation of SD-/SS-CASSI measurements, unsupervised network
reconstruction, a GAP-TV baseline and quality metrics. Cubes are
(bands, height, width) float32 arrays; masks and snapshots are 2D.
"""

from ._core import (
    adjoint,
    forward,
    gaptv,
    l1_loss,
    make_mask,
    measurement_rate,
    psnr,
    psnr_per_band,
    read_cube,
    reconstruct,
    shift_mask_stack,
    simulate,
    spectral_correlation,
    ssim,
    write_cube,
)

__all__ = [
    "adjoint",
    "forward",
    "gaptv",
    "l1_loss",
    "make_mask",
    "measurement_rate",
    "psnr",
    "psnr_per_band",
    "read_cube",
    "reconstruct",
    "shift_mask_stack",
    "simulate",
    "spectral_correlation",
    "ssim",
    "write_cube",
]
