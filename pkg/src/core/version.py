"""
Version and system information for the sub-Nyquist separation simulator
"""

# System version
VERSION = "1.0.0"
BUILD_DATE = "2026-10-17"
REPORT_FORMAT_VERSION = "1"

# System metadata
SYSTEM_INFO = {
    "version": VERSION,
    "report_format": REPORT_FORMAT_VERSION,
    "build_date": BUILD_DATE,
    "supported_sources": ["nrz_binary", "qam16_real", "gaussian"],
    "pulse_shapes": ["rect", "gaussian"],
    "pipeline_stages": [
        "generate", "mix", "gate", "pca", "whiten", "ica",
        "compose", "apply", "evaluate"
    ],
    "exit_codes": {
        "ok": 0,
        "config_or_io_error": 1,
        "degenerate_statistics": 2
    }
}


def get_system_info():
    """Get complete system information"""
    info = SYSTEM_INFO.copy()
    info["exit_codes"] = dict(SYSTEM_INFO["exit_codes"])
    return info


def get_version():
    """Get system version"""
    return VERSION
