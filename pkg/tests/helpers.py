"""
Scenario documents shared by the test modules
"""

# 1 GS/s simulation, 5 samples per symbol, ratio 1e-2 (pulse period 251 samples)
BASE_SCENARIO = {
    'simulation': {'sample_rate_hz': 1e9, 'duration_s': 1e-3, 'master_seed': 1234},
    'soi': {'kind': 'qam16_real', 'symbol_rate_hz': 200e6},
    'interference': {'kind': 'gaussian', 'bandwidth_hz': 200e6},
    'mixing': {'matrix': [[1.0, 0.5], [0.3, 1.0]]},
    'pulse': {'sampling_ratio': 0.01, 'pulse_width_s': 1e-9},
}
