"""Thin wrapper over scipy.fft with a package-wide worker-count knob.

Sequential (workers=1) is the default and is what the determinism
guarantees are stated for.
"""

from scipy import fft as _sfft

_workers = 1


def set_workers(n):
    global _workers
    _workers = max(1, int(n))


def get_workers():
    return _workers


def fftn(a, **kw):
    return _sfft.fftn(a, workers=_workers, **kw)


def ifftn(a, **kw):
    return _sfft.ifftn(a, workers=_workers, **kw)


def fft2(a, **kw):
    return _sfft.fft2(a, workers=_workers, **kw)


def ifft2(a, **kw):
    return _sfft.ifft2(a, workers=_workers, **kw)


def next_fast_len(n):
    return _sfft.next_fast_len(int(n), real=False)
