import os

# File extensions per document kind
CATALOG_EXT = ".consert-catalog"
MANIFEST_EXT = ".consert"
SCENARIO_EXT = ".consert-scenario"

EXTENSION_KINDS = {
    CATALOG_EXT: "catalog",
    MANIFEST_EXT: "manifest",
    SCENARIO_EXT: "scenario",
}

REGISTRY_ENV = "CONSERT_REGISTRY"
TIMEZONE_ENV = "CONSERT_TZ"
DEFAULT_TIMEZONE = "UTC"

INDEX_FILE = "index.tsv"
INDEX_LOCK = "index.lock"
INDEX_HEADER = ["system_id", "hash", "filename", "published_at_utc"]

TRANSCRIPT_SEP = "\t"

# Above this many inputs the linter skips truth-table checks.
TRUTH_TABLE_MAX_INPUTS = 16

# Deepest inline gate nesting the parser accepts.
MAX_CONDITION_DEPTH = 64


def registry_dir_from_env():
    value = os.environ.get(REGISTRY_ENV, "").strip()
    return value or None


def display_timezone():
    return os.environ.get(TIMEZONE_ENV, "").strip() or DEFAULT_TIMEZONE


def kind_for_path(path: str):
    for ext, kind in EXTENSION_KINDS.items():
        if str(path).endswith(ext):
            return kind
    return None
