from medground.data.augment import augment_synonym, pixel_augment
from medground.data.lexicon import SynonymLexicon, load_default_lexicon
from medground.data.parsers import (
    ParseError,
    ParseStats,
    manifest_from_imagenome,
    manifest_from_mscxr,
    parse_imagenome,
    parse_mscxr,
)
from medground.data.records import (
    PATHOLOGY_NAMES,
    TASK_ANATOMY,
    TASK_FINDING,
    DatasetManifest,
    GroundingRecord,
    ImageInfo,
    SplitSpec,
)
from medground.data.sampler import PretrainBatch, PretrainPair, build_pretrain_batches
from medground.data.splits import split_dataset
from medground.data.synthetic import (
    REGION_LAYOUT,
    SyntheticConfig,
    generate_synthetic_corpus,
)

__all__ = [
    "augment_synonym",
    "pixel_augment",
    "SynonymLexicon",
    "load_default_lexicon",
    "ParseError",
    "ParseStats",
    "manifest_from_imagenome",
    "manifest_from_mscxr",
    "parse_imagenome",
    "parse_mscxr",
    "PATHOLOGY_NAMES",
    "TASK_ANATOMY",
    "TASK_FINDING",
    "DatasetManifest",
    "GroundingRecord",
    "ImageInfo",
    "SplitSpec",
    "PretrainBatch",
    "PretrainPair",
    "build_pretrain_batches",
    "split_dataset",
    "REGION_LAYOUT",
    "SyntheticConfig",
    "generate_synthetic_corpus",
]
