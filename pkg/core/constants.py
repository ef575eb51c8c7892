"""Laboratory constants and enumerations."""

from enum import Enum


class LogLevel(str, Enum):
    """Logging levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Branch(str, Enum):
    """Monotone branches of an LSV map."""

    LEFT = "left"
    RIGHT = "right"


class PartitionKind(str, Enum):
    """First-entry partition of (0, 1/2] or first-return partition of (1/2, 1]."""

    ENTRY = "entry"
    RETURN = "return"


class SequenceGenerator(str, Enum):
    """How a parameter sequence was produced."""

    CONSTANT = "constant"
    EXPLICIT = "explicit"
    QUASISTATIC = "quasistatic"


class CurveKind(str, Enum):
    """Parameter curves available for quasistatic sequences."""

    CONSTANT = "constant"
    LINEAR = "linear"
    SINE = "sine"


class TailRule(str, Enum):
    """Extrapolation of a tail function past its stored values."""

    POWER = "power"
    STRETCHED_EXP = "stretched_exp"
    ZERO = "zero"


class HFamilyRule(str, Enum):
    """How conditional block tails depend on the previous block value."""

    TAIL_SUM = "tail_sum"
    FIXED = "fixed"


class ObservableKind(str, Enum):
    """Statistic accumulated along trajectories."""

    BIRKHOFF = "birkhoff"
    RUNNING_MAX = "running_max"
    WEIGHTED_BIRKHOFF = "weighted_birkhoff"


class ObservableFunction(str, Enum):
    """Catalog of Lipschitz base observables."""

    IDENTITY = "identity"
    COSINE = "cosine"
    DIST_HALF = "dist_half"
    ZERO = "zero"
    ONE = "one"


class CenteringMethod(str, Enum):
    """How E V_n is estimated before centering."""

    EMPIRICAL = "empirical"
    DENSITY = "density"


class InitialDensityKind(str, Enum):
    """Initial densities a run config can request."""

    UNIFORM = "uniform"
    COSINE_BUMP = "cosine_bump"
    INVARIANT = "invariant"
    POWER = "power"
    INDICATOR_LEFT = "indicator_left"


class CoefficientFamily(str, Enum):
    """Coefficient sequences a_0..a_{N-1} for quadratic-variation checks."""

    ONES = "ones"
    INVERSE_SQRT = "inverse_sqrt"
    SPIKE = "spike"


class RenewalCheck(str, Enum):
    """Renewal tail verifications."""

    STAIL = "stail"
    STAIL_B = "stail_b"
    STAIL_EXP = "stail_exp"


class AssertionMetric(str, Enum):
    """Report quantities an embedded assertion can bound."""

    SLOPE = "slope"
    R_SQUARED = "r_squared"
    MAX_VALUE = "max_value"
    PASSED = "passed"


class MarkovState(int, Enum):
    """States of the periodic three-state chain."""

    A = 0
    B = 1
    C = 2


class ExperimentKind(str, Enum):
    """Subcommands; each run config names exactly one."""

    PARTITION = "partition"
    DENSITY = "density"
    MEMORY_LOSS = "memory-loss"
    MOMENTS = "moments"
    TAILS = "tails"
    DEVIATIONS = "deviations"
    COUNTEREXAMPLE = "counterexample"
    RENEWAL_TAILS = "renewal-tails"
    QV_CHECK = "qv-check"


class ExitCode(int, Enum):
    """Process exit codes of the dispatcher."""

    OK = 0
    ASSERTION_FAILED = 1
    CONFIG_ERROR = 2
    OUTPUT_ERROR = 3
    EXPERIMENT_ERROR = 4


# Absolute tolerance for left-branch inversion
INVERSE_TOLERANCE = 1e-14

# Iteration cap for the invariant density power iteration
POWER_ITERATION_CAP = 100_000

# Alternating isotonic passes used to project onto the cone
CONE_PROJECTION_CAP = 200

# Left-branch image arrays kept per transfer operator
IMAGE_CACHE_SIZE = 16

# Transfer operators kept across distinct grids
OPERATOR_CACHE_SIZE = 8
