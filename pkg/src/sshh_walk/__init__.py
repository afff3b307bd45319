"""
sshh-walk

Exact-diagonalization quantum walks, chiral polarizations and many-body Berry
phases for SU(N) Su-Schrieffer-Heeger-Hubbard chains.
"""

__version__ = "0.1.0"
__description__ = "Topology of bound N-ions in SU(N) SSH-Hubbard chains"

from .core.runner import ExperimentRunner

__all__ = [
    "ExperimentRunner",
]
