from .analytic import analytic_infer, load_models, model_from_dict
from .engine import PriceWindow, build_windows, describe_changes, infer_price_changes, relevant_tokens
from .llm import InferenceBackendConfig, parse_scores, query_backend, resolve_verdicts
from .prompts import build_prompt_type1, build_prompt_type2
from .sources import DEFAULT_SIGNATURES, SourceBundle, extract_price_functions, load_bundle, load_bundles
from .statements import (
    Backend,
    ChangeDescription,
    PriceChangeVerdict,
    PriceDirection,
    PriceStatement,
    ScoredStatement,
    generate_statements,
)
