"""Constants for the misplaced subsequence repair package."""

DOMAIN = "misplaced_repair"

# Behavior models
DEFAULT_WINDOW_LEN = 50
DEFAULT_SUPPORT_THRESHOLD = 0.01
DEFAULT_VARIANCE_FLOOR = 1e-9

# Candidate schemas
DEFAULT_SIZE_THRESHOLD = 12
MIN_SIZE_THRESHOLD = 2
MATCHER_EXACT = "exact"
MATCHER_GREEDY = "greedy"
MATCHERS = [MATCHER_EXACT, MATCHER_GREEDY]

# Repair determination
DEFAULT_LEN1 = 10
DEFAULT_LEN2 = 10
DEFAULT_MERGE_THRESHOLD = 0.2
DEFAULT_PROTECT_LONG_BLOCKS = True

# Variants
VARIANT_ISR = "ISR"
VARIANT_GREEDY_ISR = "G-ISR"
VARIANT_CRS = "CRS"
VARIANT_BLOCK = "Block"
VARIANTS = [VARIANT_ISR, VARIANT_GREEDY_ISR, VARIANT_CRS, VARIANT_BLOCK]
DEFAULT_BLOCK_LAMBDA = 1.0
BLOCK_LAMBDA_RANGE = (1.0, 10.0)

# Evaluation
DEFAULT_JACCARD_MIN = 0.5
DEFAULT_SEED = 0
DEFAULT_MAX_WORKERS = 4

# Injection
DEFAULT_INSTANCE_COUNT = 20
DEFAULT_LENGTH_MIN = 50
DEFAULT_LENGTH_MAX = 200
DEFAULT_MAX_ORDER = 4
DEFAULT_MAX_INCONSISTENT_DIMS = 4

# Config keys
CONF_WINDOW_LEN = "window_len"
CONF_SUPPORT_THRESHOLD = "support_threshold"
CONF_VARIANCE_FLOOR = "variance_floor"
CONF_SIZE_THRESHOLD = "size_threshold"
CONF_MATCHER = "matcher"
CONF_LEN1 = "len1"
CONF_LEN2 = "len2"
CONF_MERGE_THRESHOLD = "merge_threshold"
CONF_PROTECT_LONG_BLOCKS = "protect_long_blocks"
CONF_VARIANT = "variant"
CONF_BLOCK_LAMBDA = "block_lambda"
CONF_JACCARD_MIN = "jaccard_min"
CONF_SEED = "seed"
CONF_MAX_WORKERS = "max_workers"

# Number of accepts between exact window refits
MODEL_RESYNC_EVERY = 50

# File formats
TIMESTAMP_COLUMN = "timestamp"
REPAIRED_FILE = "repaired.csv"
REPORT_FILE = "report.json"
REVIEW_FILE = "review.jsonl"
SCHEMAS_FILE = "schemas.jsonl"
CORRUPTED_FILE = "corrupted.csv"
TRUTH_FILE = "truth.json"
SCORES_FILE = "scores.json"
SCORES_CSV_FILE = "scores.csv"
RESULTS_FILE = "results.csv"

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
