"""Tree-based ego action prediction with factual and counterfactual commentary."""

from ._core import (
    CLASS_NAMES,
    FEATURE_NAMES,
    CommentreeError,
    Forest,
    bleu4,
    explain_counterfactual,
    explain_factual,
    generate_synthetic,
    load_model,
    rouge_w,
    rule_oracle,
    save_model,
    shap_values,
    train_forest,
)

__all__ = [
    "CLASS_NAMES",
    "FEATURE_NAMES",
    "CommentreeError",
    "Forest",
    "bleu4",
    "explain_counterfactual",
    "explain_factual",
    "generate_synthetic",
    "load_model",
    "rouge_w",
    "rule_oracle",
    "save_model",
    "shap_values",
    "train_forest",
]
