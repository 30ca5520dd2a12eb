"""Citation retrieval for legal case corpora.

Pipeline: corpus ingestion -> text preprocessing -> document vectors
(TF-IDF + truncated SVD, or external sentence embeddings) -> unsupervised
cluster labels -> cluster-label classifiers -> two-track citation retrieval
(global cosine top-1 plus within-cluster Euclidean neighbors), exposed as a
library, CLI, and HTTP service.
"""

__version__ = "0.1.0"
