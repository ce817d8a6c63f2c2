"""Multilingual offensive-language identification toolkit.

Corpus preprocessing, weak labeling, cross-lingual augmentation, miniature
transformer-encoder classification, and an evaluation/ablation harness.
"""

__version__ = "0.1.0"
