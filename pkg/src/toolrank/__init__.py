"""toolrank: adaptive, hierarchy-aware reranking for tool/API retrieval."""

from .errors import FormatError, ToolrankError
from .library import (
    ApiDoc,
    EvalRecord,
    Tool,
    ToolLibrary,
    load_library,
    load_records,
    render_document,
    save_library,
    save_records,
)
from .rerank import (
    HeuristicClassifier,
    OracleClassifier,
    QueryType,
    RerankConfig,
    RerankedItem,
    adaptive_truncate,
    classify_query,
    connected_components,
    cross_rerank,
    rerank_multi,
    rerank_single,
)
from .retrieval import (
    Bm25Retriever,
    Candidate,
    DenseRetriever,
    EmbeddingStore,
    InvertedIndex,
    bm25_retrieve,
    build_index,
    cosine_sim,
    dense_retrieve,
    load_embeddings,
    save_embeddings,
    tokenize,
)
from .scoring import (
    CachedScorer,
    EmbeddingDocSim,
    LexicalScorer,
    MatrixDocSim,
    OracleScorer,
    ScoreCache,
    cached_score,
    embedding_doc_sim,
    lexical_overlap_score,
    load_score_cache,
    save_score_cache,
)
from .pipeline import PipelineResult, RunContext, run_batch, run_pipeline
from .evaluation import (
    GridAxes,
    MetricReport,
    evaluate,
    grid_search,
    ndcg_at_k,
    recall_at_k,
)
from .synth import SynthBenchmark, SynthSpec, generate_synthetic_benchmark

__version__ = "0.1.0"
