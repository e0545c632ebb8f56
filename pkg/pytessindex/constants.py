"""Provides module specific constants."""

YAML_FILE_CONFIG = "pytessindex.yml"

USERS_FILE_NAME = "users.csv"
ITEMS_FILE_NAME = "items.csv"

# absolute tolerance for distance equalities
FLOAT_TOLERANCE = 1e-12

# exhaustive search over the tessellating set is refused above 2**20 candidates
BRUTE_FORCE_MAX_BITS = 20.0

TERNARY_BASE = 1

SCHEMES = ["one_hot", "counter"]
METHODS = ["tessindex", "srp", "superbit", "concomitant", "pca_tree"]

DEFAULT_KAPPA = 10
DEFAULT_THRESHOLD = 0.0
DEFAULT_SEED = 0

DEFAULT_BITS = 8
DEFAULT_TABLES = 4
DEFAULT_ARITY = 16
DEFAULT_DEPTH = 6

POWER_ITERATION_TOLERANCE = 1e-9
POWER_ITERATION_MAX_STEPS = 1000

HISTOGRAM_BINS = 20

SNAPSHOT_MAGIC = "tessindex v1"


# factors are thresholded before tessellation in benchmarks, otherwise nothing is pruned
DEFAULT_BENCH_THRESHOLD = 1.0
DEFAULT_N_USERS = 500
DEFAULT_N_ITEMS = 2000
DEFAULT_K = 10

REPORT_FILE_PREFIX = "report"
EMBEDDINGS_FILE_NAME = "embeddings.tsv"
INDEX_FILE_NAME = "index.snapshot"
