"""Global numerics configuration.

All fixed numerical tolerances used across the package live here so they can
be overridden in one place.  The environment variable ``SPINFORGE_NUMERICS``
may point at a JSON file whose keys match :class:`Numerics` fields; it is
loaded once at import.
"""

from __future__ import annotations

import dataclasses
import json
import os


@dataclasses.dataclass
class Numerics:
    hermitian_tol: float = 1e-12        # relative, max|A - A^dag| / max|A|
    unitary_tol: float = 1e-10          # max|U^dag U - 1|
    eig_orthonormal_tol: float = 1e-10
    ptm_tp_tol: float = 1e-9            # first-row deviation for TP check
    choi_cp_tol: float = 1e-9           # allowed negative Choi eigenvalue
    leakage_max: float = 0.05           # beyond this the qubit picture is invalid
    dt_rotating: float = 1e-9           # default integration step, rotating frame
    dt_lab: float = 5e-12               # default integration step, lab frame
    dt_convergence: float = 1e-6        # propagator change on dt doubling -> warning
    label_overlap_min: float = 0.5      # eigenvector-to-level assignment threshold

    def replace(self, **kw) -> "Numerics":
        return dataclasses.replace(self, **kw)


def _load_default() -> Numerics:
    path = os.environ.get("SPINFORGE_NUMERICS")
    if not path:
        return Numerics()
    with open(path, "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    known = {f.name for f in dataclasses.fields(Numerics)}
    bad = set(overrides) - known
    if bad:
        raise ValueError(f"unknown numerics keys: {sorted(bad)}")
    return Numerics(**overrides)


NUMERICS: Numerics = _load_default()
