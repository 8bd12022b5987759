"""Violence-risk prediction from clinical notes: corpus assembly, text
normalization, topic and paragraph-vector representations, class-weighted
classifiers and a grouped nested cross-validation harness."""

__version__ = "0.1.0"
