"""Compile demonstrations of grasp-manipulation-release operations into task models."""
from .core import (
    GRASP, RELEASE, ContactState, GmrOperation, SkillParams, Task, TaskModel, canonical_task_set, dumps_document,
    loads_document, validate_chain,
)
from .errors import LfoError

__version__ = "0.1.0"

__all__ = [
    "GRASP", "RELEASE", "ContactState", "GmrOperation", "LfoError", "SkillParams", "Task", "TaskModel",
    "canonical_task_set", "dumps_document", "loads_document", "validate_chain",
]
