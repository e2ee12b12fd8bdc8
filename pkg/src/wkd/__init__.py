"""Wasserstein knowledge distillation for neural topic models.

Trains a contextualized-input teacher VAE, distills it into a smaller
embeddings-only student by matching Gaussian posteriors under the squared
2-Wasserstein distance plus temperature-scaled soft labels, and evaluates
topic quality with NPMI and CV coherence.
"""

__version__ = "1.0.0"
