"""Constants and default values for spacerank."""

import math

TOOL_NAME = "spacerank"
TOOL_VERSION = "1.0.0"

# Format versions recorded in run manifests
SPACE_FORMAT_VERSION = 1
SCORE_CSV_VERSION = 1
MODEL_DUMP_VERSION = 1

# Scales
SCALE_LINEAR = "linear"
SCALE_LOG10 = "log10"
VALID_SCALES = [SCALE_LINEAR, SCALE_LOG10]

# Score variants
VARIANT_MEAN_BEI = "mean-bEI"
VARIANT_MEDIAN_BEI = "median-bEI"
VARIANT_MEAN_BPI = "mean-bPI"
VARIANT_MEDIAN_BPI = "median-bPI"
VALID_VARIANTS = [
    VARIANT_MEAN_BEI,
    VARIANT_MEDIAN_BEI,
    VARIANT_MEAN_BPI,
    VARIANT_MEDIAN_BPI,
]

# Monte Carlo defaults
DEFAULT_VARIANT = VARIANT_MEAN_BEI
DEFAULT_N_X_BATCHES = 1000
DEFAULT_N_POSTERIOR_SAMPLES = 1000
DEFAULT_N_BOOTSTRAP = 200
DEFAULT_SEED = 0
# Batches per RNG stream; fixed so results never depend on thread count
MC_CHUNK_SIZE = 50

# GP fitting
DEFAULT_MAX_ITERATIONS = 3000
DEFAULT_GRADIENT_TOLERANCE = 1e-8
DEFAULT_LBFGS_MEMORY = 10
DEFAULT_N_RESTARTS = 0
INIT_AMPLITUDE = 1.0
INIT_INV_LENGTHSCALE = 1.0
INIT_NOISE_VAR = 0.01
NOISE_PRIOR_VAR = 0.1
MIN_TRAINING_POINTS = 2
# Unconstrained parameters are kept inside this box during optimization
UNCONSTRAINED_BOUND = 30.0

# Jitter ladder, relative to amplitude**2
JITTER_START = 1e-10
JITTER_MAX = 1e-6
JITTER_FACTOR = 10.0

# Space generation
DEFAULT_RATES = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
DEFAULT_PER_RATE = 500

# Workflow labels
TUNE_LABEL = "tune"

# Rank preservation
DEFAULT_QUANTILE_BINS = 4
DEFAULT_N_PAIRS = 2000
RANK_MODE_RANDOM = "random"
RANK_MODE_MAX = "max"
VALID_RANK_MODES = [RANK_MODE_RANDOM, RANK_MODE_MAX]

# CLI
DEFAULT_OUTPUT_DIR = "spacerank_out"
OBJECTIVE_COLUMN = "objective"
EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

# Branin
BRANIN_BOUNDS = [(-5.0, 10.0), (0.0, 15.0)]
BRANIN_A = 1.0
BRANIN_B = 5.1 / (4.0 * math.pi ** 2)
BRANIN_C = 5.0 / math.pi
BRANIN_R = 6.0
BRANIN_S = 10.0
BRANIN_T = 1.0 / (8.0 * math.pi)
BRANIN_MINIMUM = 0.397887
BRANIN_MINIMIZERS = [(-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475)]

# Hartmann-6 (canonical 4-term form), A and P indexed [term][dim]
HARTMANN6_ALPHA = [1.0, 1.2, 3.0, 3.2]
HARTMANN6_A = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
]
HARTMANN6_P = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
]
HARTMANN6_MINIMUM = -3.32237
HARTMANN6_MINIMIZER = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]

# Synthetic objective names
OBJECTIVE_BRANIN = "branin"
OBJECTIVE_HARTMANN6 = "hartmann6"
OBJECTIVE_SPHERE = "sphere"
OBJECTIVE_CONSTANT = "constant"
OBJECTIVE_GRID_TABLE = "grid-table"
VALID_OBJECTIVES = [
    OBJECTIVE_BRANIN,
    OBJECTIVE_HARTMANN6,
    OBJECTIVE_SPHERE,
    OBJECTIVE_CONSTANT,
    OBJECTIVE_GRID_TABLE,
]
