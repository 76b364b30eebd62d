"""
GPMorph Configuration Module
============================
Numerical defaults and runtime settings for model building, registration and
evaluation.
"""

import os
import sys
from pathlib import Path
from dotenv import load_dotenv


def get_app_root() -> Path:
    """
    Get the application root directory.
    Works both in development and when packaged as a frozen executable.
    """
    if getattr(sys, 'frozen', False):
        return Path(sys.executable).parent
    else:
        return Path(__file__).parent


# Application root directory
APP_ROOT = get_app_root()

# Load environment variables from .env file
env_path = APP_ROOT / ".env"
if env_path.exists():
    load_dotenv(env_path)
else:
    load_dotenv()


def _env_threads() -> int:
    raw = os.getenv("GPMM_THREADS", "").strip()
    if raw:
        try:
            return int(raw)
        except ValueError:
            return 0  # rejected by validate_config
    return os.cpu_count() or 1


# ========================================
# Runtime Configuration
# ========================================
class RuntimeConfig:
    """Worker threads and evaluation block sizes"""
    THREADS = _env_threads()

    # Rows of the Gram matrix handed to one worker task
    GRAM_CHUNK = 128

    # Query points per block when evaluating eigenfunctions
    EVAL_CHUNK = 256

    @classmethod
    def set_threads(cls, threads: int) -> None:
        """Override the worker count (the CLI --threads flag)"""
        if threads < 1:
            raise ValueError(f"thread count must be positive, got {threads}")
        cls.THREADS = threads


# ========================================
# Nystrom / Low-rank Configuration
# ========================================
class NystromConfig:
    """Eigensolver and low-rank model defaults"""
    OVERSAMPLING = 10
    POWER_ITERS = 2

    # Components with lambda < EIGEN_CUTOFF * lambda_1 are dropped
    EIGEN_CUTOFF = 1e-10

    # "auto" uses a dense eigensolver below this matrix order
    DENSE_LIMIT = 2000

    # Dense Cholesky jitter schedule: JITTER * trace, times JITTER_GROWTH per retry
    JITTER = 1e-10
    JITTER_GROWTH = 10.0
    JITTER_ATTEMPTS = 3

    DEFAULT_POINTS = 2000
    DEFAULT_MAX_RANK = 200


# ========================================
# Registration Configuration
# ========================================
class RegistrationConfig:
    """Fitting defaults"""
    ETA = 1e-3
    SURFACE_POINTS = 5000
    IMAGE_POINTS = 20000

    # Correspondences are refreshed every INNER_ITERS iterations
    INNER_ITERS = 5

    LBFGS_MEMORY = 10
    GD_STEP = 1e-2
    SGD_BATCH = 1024
    SGD_STEP = 1e-2
    SGD_DECAY = 100.0

    # Abort when the energy exceeds this multiple of the initial energy
    DIVERGENCE_FACTOR = 1e3

    DEFAULT_MAX_ITERS = 200
    DEFAULT_TOL = 1e-6


# ========================================
# Geometry Configuration
# ========================================
class GeometryConfig:
    """Mesh and image handling"""
    OUT_OF_DOMAIN_VALUE = 0.0

    # Triangles with smaller area (mm^2) are dropped at construction
    DEGENERATE_AREA = 1e-12

    # Nearest triangle centroids probed before the exact ball search
    CANDIDATES = 8


# ========================================
# Shape Model Configuration
# ========================================
class ShapeModelConfig:
    """Evaluation metric defaults"""
    SPECIFICITY_SAMPLES = 1000
    DISTANCE_SAMPLES = 2000


# ========================================
# File Output Configuration
# ========================================
class OutputConfig:
    """Serialization settings"""
    JSON_INDENT = 2

    # Full float64 precision for text output
    FLOAT_FORMAT = ".17g"

    MANIFEST_VERSION = 1
    LOWRANK_FORMAT = "gpmorph-lowrank"
    DISCRETE_FORMAT = "gpmorph-discrete"

    @staticmethod
    def ensure_parent(path: Path) -> Path:
        """Ensure the parent directory of an output file exists"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path


# ========================================
# Validation
# ========================================
def validate_config() -> bool:
    """
    Validate runtime configuration.
    Returns True if valid, raises ValueError otherwise.
    """
    if RuntimeConfig.THREADS < 1:
        raise ValueError("GPMM_THREADS must be a positive integer")
    if NystromConfig.JITTER_ATTEMPTS < 1:
        raise ValueError("NystromConfig.JITTER_ATTEMPTS must be at least 1")
    return True
