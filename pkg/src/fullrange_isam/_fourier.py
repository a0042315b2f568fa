"""Unitary axial and transverse transforms used throughout the package.

The axial pair maps a full-range image (zero delay at ``n_z // 2``) to its
spectrum and back. Both directions carry a ``1/sqrt(n)`` factor, so the pair
is unitary and Parseval holds without extra bookkeeping.
"""
import numpy as np


def axial_fft(image):
    return np.fft.fft(np.fft.ifftshift(image, axes=-1), axis=-1, norm="ortho")


def axial_ifft(spectrum):
    return np.fft.fftshift(np.fft.ifft(spectrum, axis=-1, norm="ortho"), axes=-1)


def lateral_fft(arr):
    return np.fft.fft(arr, axis=0, norm="ortho")


def lateral_ifft(arr):
    return np.fft.ifft(arr, axis=0, norm="ortho")
