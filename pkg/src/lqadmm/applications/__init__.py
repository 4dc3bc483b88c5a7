"""Experiment pipelines: random instances, deblurring, MRI and registration."""
