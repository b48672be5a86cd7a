"""Kernel backend selection.

Two interchangeable implementations of the numeric hot loops exist:

* ``gcatkit._kernels._fast`` — Cython extension, built at install time;
* ``gcatkit._kernels.pure`` — numpy fallback, always available.

The compiled backend is used when importable. Set ``GCATKIT_KERNELS=pure``
or ``GCATKIT_KERNELS=fast`` to force a choice (``fast`` raises if the
extension is missing). A single process sticks with one backend, so seeded
runs stay bit-reproducible.
"""

from __future__ import annotations

import os

from . import pure as _pure

_choice = os.environ.get("GCATKIT_KERNELS", "auto").lower()

if _choice not in ("auto", "fast", "pure"):
    raise ValueError(f"GCATKIT_KERNELS must be auto, fast, or pure; got {_choice!r}")

if _choice == "pure":
    _impl = _pure
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "fast":
            raise ImportError(
                "GCATKIT_KERNELS=fast but the compiled extension is not built; "
                "reinstall the package or use GCATKIT_KERNELS=pure"
            ) from None
        _impl = _pure

BACKEND_NAME: str = _impl.BACKEND_NAME

leaky_relu = _impl.leaky_relu
leaky_relu_grad = _impl.leaky_relu_grad
segment_softmax = _impl.segment_softmax
segment_softmax_grad = _impl.segment_softmax_grad
abs_sum = _impl.abs_sum
sign_zero = _impl.sign_zero
conv3 = _impl.conv3
l1_scores = _impl.l1_scores
convkb_scores = _impl.convkb_scores
rank_counts = _impl.rank_counts


def backend_name() -> str:
    """Name of the kernel backend selected at import."""
    return BACKEND_NAME
