import os

from dotenv import load_dotenv

load_dotenv()

# Chat-completion endpoint
LLM_BASE_URL = os.getenv("LLM_BASE_URL", "https://api.openai.com/v1")
LLM_API_KEY = os.getenv("LLM_API_KEY")
LLM_MODEL = os.getenv("LLM_MODEL", "gpt-3.5-turbo")
LLM_TIMEOUT = float(os.getenv("LLM_TIMEOUT", 30))  # in seconds
LLM_MAX_RETRIES = int(os.getenv("LLM_MAX_RETRIES", 3))  # attempts, not re-tries
LLM_BACKOFF_SECONDS = float(os.getenv("LLM_BACKOFF_SECONDS", 1.0))  # doubled after every failed attempt
LLM_FAIL_ON_TRUNCATION = os.getenv("LLM_FAIL_ON_TRUNCATION", "false").lower() == "true"

# Embedders. "http" talks to the two embedding services below; "hashing" is the
# offline bag-of-words embedder used by tests and fixture runs.
EMBEDDER_KIND = os.getenv("EMBEDDER_KIND", "http")
EMBEDDER_COARSE_URL = os.getenv("EMBEDDER_COARSE_URL")
EMBEDDER_RERANK_URL = os.getenv("EMBEDDER_RERANK_URL")
EMBEDDER_TIMEOUT = float(os.getenv("EMBEDDER_TIMEOUT", 30))  # in seconds
EMBEDDER_DIMENSION = int(os.getenv("EMBEDDER_DIMENSION", 256))  # hashing embedder only

# Config file consumed by `uvicorn api.app:app` (the CLI takes --config instead)
KGNAV_CONFIG = os.getenv("KGNAV_CONFIG")

# Service settings
SERVICE_HOST = os.getenv("SERVICE_HOST", "127.0.0.1")
SERVICE_PORT = int(os.getenv("SERVICE_PORT", 8000))
# Runs allowed in flight at once; further requests get 503 until a slot frees up.
SERVICE_MAX_CONCURRENT = int(os.getenv("SERVICE_MAX_CONCURRENT", 4))
SERVICE_DRAIN_SECONDS = float(os.getenv("SERVICE_DRAIN_SECONDS", 30))

# Benchmark settings
BENCH_PARALLELISM = int(os.getenv("BENCH_PARALLELISM", 1))

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

# CONSTANTS DEFINITION
RESPONSE_SCHEMA_VERSION = 1
