"""Gaze analytics: tracker-log ingestion, event detection, features, expertise
classifiers and a streaming confusion detector."""

__version__ = "0.1.0"
