"""Simulation and tomography of non-local controlled-unitary gates."""
from .gates import ch_circuit, controlled, cz_circuit, prepare_alice, prepare_bob, topology_lint
from .noise import CalibrationTable, GateDurations, NoiseModel, load_calibration, noisy_run
from .process_tomo import average_gate_fidelity, process_fidelity, process_tomography
from .protocol import RegisterLayout, direct_controlled, protocol_circuit, run_eisert
from .sim import Circuit, Histogram, apply_channel, apply_unitary, measure_qubit, run_ideal, sample_histogram
from .state_tomo import reconstruct, state_fidelity, state_tomography, statistical_fidelity, t_from_counts

__version__ = "0.1.0"
