"""presearch: interactive information-need prediction and evaluation workbench.

Given a user-selected pre-search context and an optional partial search
intent, predict the full information need by generating a question and/or
retrieving an answering passage, and reproduce the surrounding
dataset-adaptation and experiment-grid methodology.
"""

from .adaptation import (
    ProviderReformulator,
    Reformulation,
    ReformulationRejected,
    RuleBasedReformulator,
    Sample,
    SampleSkipped,
    TrainingPair,
    adapt_inquisitive,
    adapt_marco,
    assemble_pairs,
    reformulate,
    simulate_source,
)
from .corpus import (
    CollectionError,
    Corpus,
    Document,
    Judgment,
    Query,
    SplitAssignment,
    assign_splits,
    load_collection,
    save_collection,
)
from .lexical import InvertedIndex, bm25_score, build_index, load_index, save_index, search, tokenize
from .metrics import (
    TTestResult,
    bleu_n,
    mrr,
    recall_at_k,
    regularized_incomplete_beta,
    rouge_l,
    rouge_n,
    t_test_independent,
)
from .prediction import (
    InputVariant,
    RetrievalPipeline,
    VariantKind,
    build_candidate_pool,
    build_variant,
    generate_question,
    make_pipeline,
    retrieve,
    route_variant,
)
from .providers import (
    EmbeddingVector,
    GenerationRequest,
    HttpProvider,
    OfflineProvider,
    ProviderConfig,
    ProviderError,
    make_provider,
)
from .ranking import RankedList, read_trec_run, write_trec_run
from .report import (
    GenerationEvalRecord,
    MetricReport,
    compare_reports,
    evaluate_generation,
    evaluate_retrieval,
)
from .scorers import (
    LossSpec,
    ScorerConfig,
    cosine_embedding_loss,
    cosine_similarity,
    export_training_pairs,
    mse_label_loss,
    score,
)

__version__ = "0.1.0"
