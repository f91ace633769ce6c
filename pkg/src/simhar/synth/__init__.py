from .generator import (
    FAMILIES,
    LABEL_PHRASES,
    MotionGenerator,
    ProceduralGenerator,
    PromptSpec,
    default_prompts,
    forward_kinematics,
    sample_motion,
)
from .dataset import GenerationConfig, generate_dataset, mix_datasets, plan_records, record_count, subsample

__all__ = [
    "FAMILIES", "LABEL_PHRASES", "MotionGenerator", "ProceduralGenerator", "PromptSpec",
    "default_prompts", "forward_kinematics", "sample_motion", "GenerationConfig",
    "generate_dataset", "mix_datasets", "plan_records", "record_count", "subsample",
]
