import core.logging as logging
from core.config import LLM_API_KEY
from core.settings import Settings, to_engine_config
from llm.gateway import GatewayMode
from reasoning.engine import ConfigError


def validate_engine_params(settings: Settings, errors: list[str]) -> None:
    try:
        to_engine_config(settings)
    except ConfigError as e:
        errors.extend(e.errors)
    except ValueError as e:
        errors.append(str(e))


def validate_data_params(settings: Settings, errors: list[str]) -> None:
    data = settings.data
    if data.graph is None:
        errors.append("data.graph is missing")
    elif not data.graph.is_file():
        errors.append(f"data.graph file not found: {data.graph}")
    if data.labels is not None and not data.labels.is_file():
        errors.append(f"data.labels file not found: {data.labels}")
    if data.corpus is None:
        errors.append("data.corpus is missing")
    elif not data.corpus.is_file():
        errors.append(f"data.corpus file not found: {data.corpus}")


def validate_model_params(settings: Settings, errors: list[str], needs_api_key: bool = True) -> None:
    llm = settings.llm
    if needs_api_key and llm.mode is not GatewayMode.REPLAY and not LLM_API_KEY:
        errors.append(f"LLM_API_KEY is missing (required in {llm.mode} mode)")
    if llm.mode is not GatewayMode.LIVE and llm.transcripts is None:
        errors.append(f"llm.transcripts is missing (required in {llm.mode} mode)")
    if llm.mode is GatewayMode.REPLAY and llm.transcripts is not None and not llm.transcripts.is_file():
        errors.append(f"llm.transcripts file not found: {llm.transcripts}")

    embedder = settings.embedder
    if embedder.kind not in ("http", "hashing"):
        errors.append(f"embedder.kind must be 'http' or 'hashing' (got {embedder.kind!r})")
    if embedder.kind == "http":
        if not embedder.coarse_url:
            errors.append("EMBEDDER_COARSE_URL / embedder.coarse_url is missing")
        if not embedder.rerank_url:
            errors.append("EMBEDDER_RERANK_URL / embedder.rerank_url is missing")


def log_configuration_summary(settings: Settings) -> None:
    e = settings.engine
    logging.info("=" * 60)
    logging.info("✅ CONFIGURATION VALIDATED SUCCESSFULLY")
    logging.info("=" * 60)
    logging.info(f"Graph: {settings.data.graph} (labels: {settings.data.labels or 'from ids'})")
    logging.info(f"Corpus: {settings.data.corpus}")
    logging.info(f"Model: {settings.llm.model} ({settings.llm.mode} mode)")
    logging.info(f"Embedders: {settings.embedder.kind}")
    logging.info(f"Width: {e.width} | Depth: {e.max_depth} | K: {e.top_k} | L: {e.top_l} | alpha: {e.alpha}")
    logging.info(
        f"Topic prune: {e.topic_prune} | Batched relation prune: {e.batched_relation_prune} | "
        f"Clue queries: {e.clue_query}"
    )
    logging.info(
        f"Chunks: {e.chunk_size} words, overlap {e.chunk_overlap} | Global top-K: {e.global_top_k} | "
        f"Rank origin: {e.rank_origin} | Workers: {e.max_workers}"
    )
    logging.info("-" * 60 + "\n")


def validate_config(settings: Settings, *, needs_stores: bool = True, needs_api_key: bool = True) -> bool:
    errors: list[str] = []

    validate_engine_params(settings, errors)
    validate_model_params(settings, errors, needs_api_key)
    if needs_stores:
        validate_data_params(settings, errors)

    # Log all errors at the end
    if errors:
        logging.error("=" * 60)
        logging.error("❌ CONFIGURATION VALIDATION FAILED")
        logging.error("=" * 60)
        for error in errors:
            logging.error(f"  - {error}")
        logging.error("=" * 60)
        return False

    log_configuration_summary(settings)
    return True
