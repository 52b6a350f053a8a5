"""Geometric quantification of single-qubit quantum memories.

A qubit channel maps the Bloch ball onto an ellipsoid. This package computes
that ellipsoid, fits it from measured output states, reconstructs candidate
channels, and compares its volume with entanglement-based memory quantifiers.
"""

from .channel import (
    AffineMap,
    CptpReport,
    PauliForm,
    affine_map,
    apply_choi,
    apply_kraus,
    choi_from_kraus,
    choi_from_pauli,
    is_cptp,
    kraus_ops,
    output_bloch,
    pauli_form,
    preset,
    random_kraus,
)
from .circuitsim import (
    QRegister,
    ShotRecord,
    SweepResult,
    SweepRow,
    apply_gate,
    run_amplitude_damping_circuit,
    run_circuit,
    run_depolarizing_circuit,
    simulate_points,
    sweep,
    tomography,
)
from .ellipsoid import (
    BlochPoint,
    Candidate,
    Ellipsoid,
    FitResult,
    Mesh,
    default_grid,
    ellipsoid_of_channel,
    fit_ellipsoid,
    mesh,
    reconstruct_choi_candidates,
    sample_outputs,
    volume,
    volume_bound,
)
from .errors import *  # noqa: F401,F403
from .metrics import (
    MemoryReport,
    concurrence,
    is_eb,
    memory_report,
    memory_robustness,
    negativity,
    state_robustness,
)
from .numerics import (
    Spectrum,
    hermitian_eig,
    nearest_psd,
    partial_trace,
    partial_transpose,
    psd_sqrt,
)

__version__ = "0.1.0"
