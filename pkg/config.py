import os

from dotenv import load_dotenv

load_dotenv()


class BinmomConfig:
    """Configuration settings for the binary moment toolkit"""

    # App Information
    APP_NAME = "binmom"
    APP_VERSION = "1.0.0"
    APP_DESCRIPTION = "Fit, sample and benchmark correlated binary families"

    # Enumeration of the binary space
    ENUMERATION_CAP = int(os.getenv('BINMOM_ENUMERATION_CAP', 20))
    EXACT_MAX_DIM = int(os.getenv('BINMOM_EXACT_MAX_DIM', 10))

    # Numerical tolerances
    SYMMETRY_TOL = 1e-12
    MATRIX_FILE_SYMMETRY_TOL = 1e-9
    PD_TOL = 1e-10
    PMF_SUM_TOL = 1e-12
    SAME_MEAN_TOL = 1e-10

    # Newton-Raphson fitting
    MAX_NEWTON_ITER = int(os.getenv('BINMOM_MAX_NEWTON_ITER', 50))
    NEWTON_TOL_EXACT = 1e-8
    NEWTON_TOL_MC = 1e-3
    HOMOTOPY_GRID = int(os.getenv('BINMOM_HOMOTOPY_GRID', 10))
    PARAM_CAP = 30.0
    MAX_STEP_HALVINGS = 20
    LOGISTIC_SATURATION = 35.0

    # Monte Carlo sample sizes
    N_FIT = int(os.getenv('BINMOM_N_FIT', 10_000))
    N_EST = int(os.getenv('BINMOM_N_EST', 1_000_000))
    MC_CHUNK = 100_000

    # Gaussian copula
    COPULA_TOL = 1e-8
    COPULA_EDGE = 1e-9
    COPULA_START_CLAMP = 0.99
    REPAIR_MARGIN = 1e-8

    # Random cross-moment generator
    PERMUTATIONS_PER_DIM = 10
    SWEEPS = int(os.getenv('BINMOM_SWEEPS', 500))
    DET_REFRESH_SWEEPS = 50
    DET_REL_TOL = 1e-8

    # Metropolis-Hastings
    BURN_IN_FRACTION = 0.1
    KERNEL_MAX_DIM = 6

    # Benchmark
    BENCH_DIMS = (10, 25, 50)
    BENCH_LEVELS = 15
    BENCH_MATRICES = 200
    BENCH_FAMILIES = ("logistic", "truncated-linear", "gaussian-copula")
    BENCH_NORM = "spectral"
    BENCH_OMEGAS = 20
    BASE_SEED = int(os.getenv('BINMOM_SEED', 20240101))
    WORKERS = int(os.getenv('BINMOM_WORKERS', 1))

    # Output
    OUTPUT_DIR = os.getenv('BINMOM_OUTPUT_DIR', os.path.join(os.getcwd(), "results"))
    RESULTS_DB_PATH = os.getenv('BINMOM_RESULTS_DB', os.path.join(OUTPUT_DIR, "records.db"))
    CSV_HEADER = ("d", "rho", "family", "matrix_index", "tau", "lambda_min", "repaired", "seed")

    # Family display
    FAMILIES = {
        "logistic": {
            "label": "Logistic conditionals family",
            "short": "logistic"
        },
        "truncated-linear": {
            "label": "Truncated linear conditionals family",
            "short": "linear"
        },
        "probit": {
            "label": "Probit conditionals family",
            "short": "probit"
        },
        "cloglog": {
            "label": "Complementary log-log conditionals family",
            "short": "cloglog"
        },
        "gaussian-copula": {
            "label": "Gaussian copula family",
            "short": "copula"
        },
        "quadexp": {
            "label": "Exponential quadratic family",
            "short": "quadexp"
        }
    }

    @classmethod
    def get_family_label(cls, family):
        """Get the display label of a family name"""
        return cls.FAMILIES.get(family, {}).get("label", family)


class DevelopmentConfig(BinmomConfig):
    """Development-specific configuration"""
    DEBUG = True
    VERBOSE = True


class ProductionConfig(BinmomConfig):
    """Production-specific configuration"""
    DEBUG = False
    VERBOSE = os.getenv('BINMOM_VERBOSE', '1') != '0'


# Default configuration
Config = DevelopmentConfig if os.getenv('BINMOM_ENV') == 'development' else ProductionConfig
