from dataclasses import dataclass
from pathlib import Path


@dataclass
class DEFAULTS:
    OUTPUT_DIR = Path("out")
    DIAGNOSTICS_PATH = Path("diagnostics.csv")
    SUMMARY_PATH = Path("summary.json")
    TIMINGS_PATH = Path("timings.csv")
    K_MAX = 8
    TRIALS = 500
    SEED = 42
    N_SPECIES = "2..8"
    LOG_LEVEL = "WARNING"
    THREADS_ENV = "MSDIFF_THREADS"
