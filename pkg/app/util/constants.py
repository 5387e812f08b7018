DEFAULT_FINAL_WINDOW = 200
DEFAULT_CONVERGENCE_FRACTION = 0.95
DEFAULT_MOVING_AVERAGE = 100

STALL_QUEUE_LIMIT = 5

ENUMERATION_GUARD = 10_000_000

CHECKPOINT_MAGIC = b"DNAF"
CHECKPOINT_VERSION = 1

METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"
CHECKPOINT_DIR = "checkpoint"
EVAL_FILE = "eval.csv"
EVAL_SUMMARY_FILE = "eval_summary.json"
SLOT_TRACE_FILE = "slot_trace.csv"
COMPARISON_FILE = "comparison.json"
