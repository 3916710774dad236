"""Orchestrator package initialization"""

from orchestrator.orchestrator import CvResult, ExperimentKind, Orchestrator

__all__ = ["Orchestrator", "ExperimentKind", "CvResult"]
